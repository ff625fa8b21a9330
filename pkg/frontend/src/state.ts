import type { RunKey } from "./types.js";

/** Snapshot of one configuration kept for side-by-side comparison. */
export interface Pin {
  n: number;
  seed: number;
  alpha: number;
  tau: number;
  services: number[][];
  outliers: number[];
  metricsText: string | null;
}

export interface ViewState {
  n: number;
  seed: number;
  alpha: number;
  tau: number;
  highlighted: number | null;
  pins: Pin[];
}

// tau is an open interval; clamp slider input to a representable band
const TAU_MIN = 0.01;
const TAU_MAX = 0.99;

const clamp = (v: number, lo: number, hi: number) =>
  Math.min(Math.max(v, lo), hi);

export type Listener = (state: ViewState) => void;

/**
 * Holds the explorer's view state and enforces its invariants: alpha in
 * [0, 1], tau strictly inside (0, 1), and the selected run always one
 * the server advertised.
 */
export class StateStore {
  private state: ViewState;

  private listeners = new Set<Listener>();

  constructor(
    private runs: RunKey[],
    initial?: Partial<Pick<ViewState, "alpha" | "tau">>,
  ) {
    if (runs.length === 0) {
      throw new Error("no runs advertised by the server");
    }
    this.state = {
      n: runs[0].n,
      seed: runs[0].seed,
      alpha: clamp(initial?.alpha ?? 0.5, 0, 1),
      tau: clamp(initial?.tau ?? 0.2, TAU_MIN, TAU_MAX),
      highlighted: null,
      pins: [],
    };
  }

  get(): ViewState {
    return {
      ...this.state,
      pins: [...this.state.pins],
    };
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private notify(): void {
    const snapshot = this.get();
    for (const fn of this.listeners) fn(snapshot);
  }

  setAlpha(alpha: number): void {
    this.state.alpha = clamp(alpha, 0, 1);
    this.notify();
  }

  setTau(tau: number): void {
    this.state.tau = clamp(tau, TAU_MIN, TAU_MAX);
    this.notify();
  }

  /** Heatmap click: move both sliders in one notification. */
  snapTo(alpha: number, tau: number): void {
    this.state.alpha = clamp(alpha, 0, 1);
    this.state.tau = clamp(tau, TAU_MIN, TAU_MAX);
    this.notify();
  }

  /** Returns false (and keeps the current run) for an unknown key. */
  setRun(n: number, seed: number): boolean {
    const known = this.runs.some((r) => r.n === n && r.seed === seed);
    if (!known) return false;
    this.state.n = n;
    this.state.seed = seed;
    this.notify();
    return true;
  }

  highlight(classId: number | null): void {
    this.state.highlighted = classId;
    this.notify();
  }

  /** Deduplicates on (n, seed, alpha, tau). Returns false when already pinned. */
  pin(entry: Pin): boolean {
    const exists = this.state.pins.some(
      (p) =>
        p.n === entry.n &&
        p.seed === entry.seed &&
        p.alpha === entry.alpha &&
        p.tau === entry.tau,
    );
    if (exists) return false;
    this.state.pins.push(entry);
    this.notify();
    return true;
  }

  unpin(index: number): void {
    if (index >= 0 && index < this.state.pins.length) {
      this.state.pins.splice(index, 1);
      this.notify();
    }
  }
}
