import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiFailure } from "../src/api.js";
import { SessionController } from "../src/state.js";
import { MockService } from "./mock_service.js";

describe("SessionController against the service contract", () => {
  let controller: SessionController;
  let mock: MockService;

  beforeEach(async () => {
    mock = new MockService(16);
    controller = new SessionController(new ApiClient("", mock.fetchLike()));
    await controller.init(7);
  });

  it("creates a session and loads the scene", () => {
    expect(controller.view.sessionId).toBeTruthy();
    expect(controller.scene!.scene.entities[0].kind).toBe("human");
  });

  it("attention bars sum to 1 and are pure pass-through", async () => {
    await controller.synthesize("place a tall lamp behind me", 3);
    const bars = controller.attentionBars();
    const total = bars.reduce((a, b) => a + b.weight, 0);
    expect(Math.abs(total - 1)).toBeLessThan(1e-9);
    expect(bars.map((b) => b.label)).toEqual(["human", "round table"]);
  });

  it("marks the pinned quarter unchanged in the diff overlay", async () => {
    const before = [...controller.scene!.scene.target.points];
    const result = await controller.edit(
      "alter_shape", "place a round sofa next to me", "square sofa", 11);
    const unchanged = controller.unchangedIndices();
    expect([...unchanged].sort((a, b) => a - b))
      .toEqual([...result.fixed_indices!].sort((a, b) => a - b));
    for (const j of unchanged) {
      expect(result.points[j * 3]).toBe(before[j * 3]);
      expect(result.points[j * 3 + 2]).toBe(before[j * 3 + 2]);
    }
    expect(unchanged.length).toBe(4); // 25% of 16
  });

  it("replaying a history entry reproduces identical coordinates", async () => {
    const first = await controller.synthesize("place a square sofa next to me", 42);
    await controller.edit("alter_shape", "place a round sofa next to me",
      "square sofa", 5);
    const replayed = await controller.replay(0);
    expect(replayed.seed).toBe(42);
    expect(replayed.points).toEqual(first.points);
  });

  it("records every command with its seed in the history", async () => {
    await controller.synthesize("place a square sofa next to me", 1);
    await controller.edit("displace", "place a square sofa behind me",
      "square sofa", 2);
    expect(controller.history.map((h) => [h.op, h.seed])).toEqual([
      ["synthesize", 1], ["displace", 2],
    ]);
  });

  it("holds no model logic: displayed numbers equal service numbers", async () => {
    const result = await controller.synthesize("place a square sofa next to me", 9);
    expect(controller.lastResult!.points).toBe(result.points);
    const bars = controller.attentionBars();
    result.attention_weights.forEach((w, i) => expect(bars[i].weight).toBe(w));
  });

  it("rejects a second command while one is pending", async () => {
    const p1 = controller.synthesize("place a square sofa next to me", 1);
    await expect(controller.synthesize("x", 2)).rejects.toThrow(/pending/);
    await p1;
  });

  it("surfaces server errors and keeps history unchanged", async () => {
    await expect(
      controller.edit("alter_shape", "prompt", "not the target", 1),
    ).rejects.toBeInstanceOf(ApiFailure);
    expect(controller.lastError).toMatch(/unknown object id/);
    expect(controller.history).toEqual([]);
  });

  it("layer toggles never mutate session state", async () => {
    const before = JSON.stringify(controller.scene);
    controller.toggleLayer("guidingPoints");
    controller.toggleLayer("entities");
    expect(JSON.stringify(controller.scene)).toBe(before);
    expect(controller.view.layers.guidingPoints).toBe(false);
  });

  it("selecting an unknown entity fails fast", () => {
    expect(() => controller.selectEntity("phantom chair")).toThrow(/unknown/);
    controller.selectEntity("round table");
    expect(controller.view.selectedEntity).toBe("round table");
  });
});
