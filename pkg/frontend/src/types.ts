// Wire types of the scene service API.

export interface EntityRecord {
  kind: "human" | "object";
  label: string;
  points: number[]; // flat row-major xyz
  solid: unknown;
}

export interface SceneRecord {
  id: string;
  prompt: string;
  entities: EntityRecord[];
  target: EntityRecord;
  meta: Record<string, unknown>;
}

export interface SessionPayload {
  session_id: string;
  scene: SceneRecord;
  history: HistoryEntry[];
}

export interface GenerationResult {
  points: number[];
  guiding_points: number[];
  attention_weights: number[];
  entity_labels: string[];
  seed: number;
  op: string;
  fixed_indices?: number[];
}

export type EditOp = "replace" | "alter_shape" | "displace";

export interface HistoryEntry {
  op: "synthesize" | EditOp;
  prompt: string;
  seed: number;
  target_id?: string;
}

export interface HealthPayload {
  status: string;
  checkpoint: string;
  n_points: number;
}

export function toPoints(flat: number[]): Float64Array[] {
  const out: Float64Array[] = [];
  for (let i = 0; i + 2 < flat.length; i += 3) {
    out.push(new Float64Array([flat[i], flat[i + 1], flat[i + 2]]));
  }
  return out;
}
