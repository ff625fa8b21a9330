import { ApiClient, ApiError, StaleRequest, type CellQuery } from "./api.js";
import { debounce } from "./debounce.js";
import { forceLayout } from "./layout.js";
import { StateStore, type Pin } from "./state.js";
import {
  describeDecomposition,
  renderGraph,
  renderHeatmap,
  renderMetrics,
  renderPins,
  renderProjectSummary,
  renderRunOptions,
  setStale,
  showBanner,
} from "./render.js";
import type { Decomposition, GraphDoc, HeatmapDoc } from "./types.js";

const GRAPH_W = 640;
const GRAPH_H = 480;

// heatmap axes requested from the server; steps mirror the sweep lattice
const HEATMAP_ALPHAS = Array.from({ length: 11 }, (_, i) =>
  Number((i * 0.1).toFixed(1)),
);
const HEATMAP_TAUS = Array.from({ length: 19 }, (_, i) =>
  Number((0.05 + i * 0.05).toFixed(2)),
);

const byId = <T extends Element>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as unknown as T;
};

const boot = async () => {
  const banners = byId<HTMLElement>("banners");
  const graphSvg = byId<SVGSVGElement>("graph");
  const heatmapSvg = byId<SVGSVGElement>("heatmap");
  const metricsEl = byId<HTMLElement>("metrics");
  const summaryEl = byId<HTMLElement>("decomposition-summary");
  const pinsEl = byId<HTMLElement>("pins");
  const runSelect = byId<HTMLSelectElement>("run");
  const alphaSlider = byId<HTMLInputElement>("alpha");
  const tauSlider = byId<HTMLInputElement>("tau");
  const alphaValue = byId<HTMLElement>("alpha-value");
  const tauValue = byId<HTMLElement>("tau-value");
  const pinButton = byId<HTMLButtonElement>("pin");

  const api = new ApiClient("");
  const project = await api.fetchProject();
  const runs = await api.fetchRuns();
  renderProjectSummary(byId<HTMLElement>("project"), project);

  const store = new StateStore(runs);
  let heatmapDoc: HeatmapDoc | null = null;
  let lastRendered: {
    query: CellQuery;
    decomposition: Decomposition;
    graph: GraphDoc;
    metricsText: string | null;
  } | null = null;
  let refreshToken = 0;

  const syncControls = () => {
    const s = store.get();
    alphaSlider.value = String(s.alpha);
    tauSlider.value = String(s.tau);
    alphaValue.textContent = s.alpha.toFixed(2);
    tauValue.textContent = s.tau.toFixed(2);
    renderRunOptions(runSelect, runs, s);
    renderHeatmap(heatmapSvg, heatmapDoc, s, {
      onPick: (alpha, tau) => store.snapTo(alpha, tau),
    });
    renderPins(pinsEl, s.pins, {
      onRestore: (pin) => {
        store.setRun(pin.n, pin.seed);
        store.snapTo(pin.alpha, pin.tau);
      },
      onRemove: (index) => store.unpin(index),
    });
  };

  const refresh = async () => {
    const s = store.get();
    const query: CellQuery = { n: s.n, seed: s.seed, alpha: s.alpha, tau: s.tau };
    const token = ++refreshToken;
    setStale(graphSvg, true);
    setStale(metricsEl, true);

    const [decompResult, graphResult, metricsResult] = await Promise.allSettled([
      api.fetchDecomposition(query),
      api.fetchGraph(query),
      api.fetchMetrics(query),
    ]);
    if (token !== refreshToken) return;

    let metricsText: string | null = null;
    let metricsNote: string | null = null;
    if (metricsResult.status === "fulfilled") {
      metricsText = metricsResult.value.text;
    } else if (metricsResult.reason instanceof ApiError) {
      metricsNote = metricsResult.reason.message;
    } else if (!(metricsResult.reason instanceof StaleRequest)) {
      showBanner(banners, String(metricsResult.reason));
    }

    if (
      decompResult.status === "fulfilled" &&
      graphResult.status === "fulfilled"
    ) {
      const decomposition = decompResult.value;
      const graph = graphResult.value;
      const positions = forceLayout(
        graph.nodes.map((node) => node.id),
        graph.edges.map((e) => [e.source, e.target] as [number, number]),
        graph.services.map((svc) => svc.classes),
        GRAPH_W,
        GRAPH_H,
      );
      renderGraph(graphSvg, graph, positions, store.get().highlighted, {
        onHover: (id) => store.highlight(id),
      });
      summaryEl.textContent = describeDecomposition(decomposition);
      renderMetrics(metricsEl, metricsText, metricsNote);
      setStale(graphSvg, false);
      setStale(metricsEl, false);
      lastRendered = { query, decomposition, graph, metricsText };
    } else {
      for (const result of [decompResult, graphResult]) {
        if (
          result.status === "rejected" &&
          !(result.reason instanceof StaleRequest)
        ) {
          showBanner(banners, String(
            result.reason instanceof ApiError
              ? result.reason.message
              : result.reason,
          ));
        }
      }
      renderMetrics(metricsEl, metricsText, metricsNote);
    }
  };

  const refreshHeatmap = async () => {
    const s = store.get();
    try {
      heatmapDoc = await api.fetchHeatmap(s.n, s.seed, HEATMAP_ALPHAS, HEATMAP_TAUS);
      syncControls();
    } catch (err) {
      if (err instanceof StaleRequest) return;
      heatmapDoc = null;
      showBanner(
        banners,
        err instanceof ApiError ? err.message : String(err),
      );
    }
  };

  const debouncedRefresh = debounce(() => {
    void refresh();
  }, 100);

  store.subscribe(() => {
    syncControls();
    debouncedRefresh();
  });

  alphaSlider.addEventListener("input", () => {
    store.setAlpha(Number(alphaSlider.value));
  });
  tauSlider.addEventListener("input", () => {
    store.setTau(Number(tauSlider.value));
  });
  runSelect.addEventListener("change", () => {
    const [n, seed] = runSelect.value.split(":").map(Number);
    if (store.setRun(n, seed)) void refreshHeatmap();
  });
  pinButton.addEventListener("click", () => {
    if (lastRendered === null) return;
    const { query, decomposition, metricsText } = lastRendered;
    const pin: Pin = {
      n: query.n,
      seed: query.seed,
      alpha: query.alpha,
      tau: query.tau,
      services: decomposition.services,
      outliers: decomposition.outliers,
      metricsText,
    };
    if (!store.pin(pin)) {
      showBanner(banners, "this configuration is already pinned");
    }
  });

  syncControls();
  await Promise.all([refresh(), refreshHeatmap()]);
};

boot().catch((err) => {
  const banners = document.getElementById("banners");
  if (banners !== null) {
    showBanner(banners, `failed to load: ${err instanceof Error ? err.message : err}`, 60000);
  }
});
