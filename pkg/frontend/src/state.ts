// Session controller: all UI behavior that is not literally drawing pixels.
// It holds no model logic — every number it exposes comes from a service
// response — and it serializes mutations (one in-flight command at a time).

import { ApiClient } from "./api.js";
import type {
  EditOp, GenerationResult, HistoryEntry, SessionPayload,
} from "./types.js";

export interface ViewState {
  sessionId: string | null;
  selectedEntity: string | null;
  layers: { entities: boolean; target: boolean; guidingPoints: boolean };
}

export interface AttentionBar {
  label: string;
  weight: number;
}

export class SessionController {
  view: ViewState = {
    sessionId: null,
    selectedEntity: null,
    layers: { entities: true, target: true, guidingPoints: true },
  };
  scene: SessionPayload | null = null;
  lastResult: GenerationResult | null = null;
  history: HistoryEntry[] = [];
  busy = false;
  lastError: string | null = null;
  /** target coordinates before the most recent edit, for the diff overlay */
  private previousTarget: number[] | null = null;

  constructor(private api: ApiClient) {}

  async init(seed: number): Promise<void> {
    const id = await this.api.createSession(seed);
    this.view.sessionId = id;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.view.sessionId) throw new Error("no session");
    this.scene = await this.api.getSession(this.view.sessionId);
  }

  selectEntity(label: string | null): void {
    if (label !== null && this.scene &&
        !this.scene.scene.entities.some((e) => e.label === label) &&
        this.scene.scene.target.label !== label) {
      throw new Error(`unknown entity ${label}`);
    }
    this.view.selectedEntity = label;
  }

  toggleLayer(name: keyof ViewState["layers"]): void {
    this.view.layers[name] = !this.view.layers[name];
  }

  private async mutate(entry: HistoryEntry,
                       run: () => Promise<GenerationResult>): Promise<GenerationResult> {
    if (!this.view.sessionId) throw new Error("no session");
    if (this.busy) throw new Error("a command is already pending");
    this.busy = true;
    this.lastError = null;
    this.previousTarget = this.scene ? [...this.scene.scene.target.points] : null;
    try {
      const result = await run();
      this.lastResult = result;
      this.history.push({ ...entry, seed: result.seed });
      await this.refresh();
      return result;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
    }
  }

  synthesize(prompt: string, seed?: number): Promise<GenerationResult> {
    return this.mutate({ op: "synthesize", prompt, seed: seed ?? -1 },
      () => this.api.synthesize(this.view.sessionId!, prompt, seed));
  }

  edit(op: EditOp, prompt: string, targetId: string,
       seed?: number): Promise<GenerationResult> {
    return this.mutate({ op, prompt, seed: seed ?? -1, target_id: targetId },
      () => this.api.edit(this.view.sessionId!, op, prompt, targetId, seed));
  }

  /** Re-issue a past command with its recorded seed. */
  replay(index: number): Promise<GenerationResult> {
    const entry = this.history[index];
    if (!entry) throw new Error(`no history entry ${index}`);
    if (entry.op === "synthesize") {
      return this.synthesize(entry.prompt, entry.seed);
    }
    return this.edit(entry.op, entry.prompt, entry.target_id!, entry.seed);
  }

  /** Attention panel data; weights are exactly the service's values. */
  attentionBars(): AttentionBar[] {
    if (!this.lastResult) return [];
    return this.lastResult.entity_labels.map((label, i) => ({
      label,
      weight: this.lastResult!.attention_weights[i] ?? 0,
    }));
  }

  /**
   * Diff overlay for shape edits: indices of result points that are exactly
   * equal to the pre-edit target coordinates.
   */
  unchangedIndices(): number[] {
    if (!this.lastResult || !this.previousTarget) return [];
    const out: number[] = [];
    const pts = this.lastResult.points;
    for (let j = 0; j * 3 + 2 < pts.length && j * 3 + 2 < this.previousTarget.length; j++) {
      if (pts[j * 3] === this.previousTarget[j * 3] &&
          pts[j * 3 + 1] === this.previousTarget[j * 3 + 1] &&
          pts[j * 3 + 2] === this.previousTarget[j * 3 + 2]) {
        out.push(j);
      }
    }
    return out;
  }
}
