/** Payload shapes of the decomposition API. */

export interface RunKey {
  n: number;
  seed: number;
}

export interface ProjectClass {
  id: number;
  name: string;
  n_methods: number;
}

export interface ProjectSummary {
  n_classes: number;
  classes: ProjectClass[];
  n_intra_edges: number;
  n_inter_edges: number;
  n_class_pairs: number;
  total_calls: number;
}

export interface Decomposition {
  services: number[][];
  outliers: number[];
  alpha: number | null;
  tau: number | null;
  n_clusters: number;
  provenance: Record<string, unknown>;
}

export interface MetricValues {
  sm: number;
  icp: number;
  ifn: number;
  ned: number;
  qscore?: number;
}

export interface GraphNode {
  id: number;
  name: string;
  services: number[];
  outlier: boolean;
  overlap: boolean;
}

export interface GraphEdge {
  source: number;
  target: number;
  count: number;
  intra: boolean;
}

export interface GraphService {
  index: number;
  size: number;
  classes: number[];
}

export interface GraphDoc {
  nodes: GraphNode[];
  edges: GraphEdge[];
  services: GraphService[];
  outliers: number[];
}

export interface HeatmapDoc {
  n: number;
  seed: number;
  alphas: number[];
  taus: number[];
  qscore: (number | null)[][];
  reports: (MetricValues | null)[][];
}
