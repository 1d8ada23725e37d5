import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SelectionController, SelectionView } from "../src/selection.js";
import { FakeServer, makeScene } from "./helpers.js";

function setup(scenes = [makeScene(0, 5)]) {
  const server = new FakeServer(scenes);
  const events: Array<{ scene: number; view: SelectionView }> = [];
  const controller = new SelectionController(
    new ApiClient(server.fetchLike),
    (scene, view) => events.push({ scene, view }),
  );
  for (const s of scenes) controller.seed(s.scene_index, s.selected_index);
  return { server, controller, events };
}

describe("SelectionController", () => {
  it("shows the optimistic choice, then reconciles with the server", async () => {
    const { server, controller, events } = setup();
    const submit = controller.submit(0, 3);
    // optimistic highlight appears before the server answers
    expect(events[0]!.view.optimistic).toBe(3);
    expect(controller.highlighted(0)).toBe(3);
    const outcome = await submit;
    expect(outcome.changed).toBe(true);
    expect(server.scenes[0]!.selected_index).toBe(3);
    // after reconciliation the rendered state is exactly the confirmed one
    const final = events.at(-1)!.view;
    expect(final).toEqual({ confirmed: 3, optimistic: null });
  });

  it("reverts the highlight and surfaces the message on 4xx", async () => {
    const { server, controller, events } = setup(
      [makeScene(0, 5, 1)],
    );
    server.failNext = 400;
    const outcome = await controller.submit(0, 4);
    expect(outcome.changed).toBe(false);
    expect(outcome.error).toContain("injected 400");
    expect(controller.highlighted(0)).toBe(1); // previous confirmed choice
    const final = events.at(-1)!.view;
    expect(final.optimistic).toBeNull();
    expect(server.scenes[0]!.selected_index).toBe(1);
  });

  it("treats re-activating the confirmed tile as a no-op", async () => {
    const { server, controller } = setup([makeScene(0, 5, 2)]);
    const outcome = await controller.submit(0, 2);
    expect(outcome.changed).toBe(false);
    expect(server.requests.filter((r) => r.startsWith("POST"))).toHaveLength(0);
  });

  it("coalesces a double-click into a single state change", async () => {
    const { server, controller } = setup();
    const [first, second] = await Promise.all([
      controller.submit(0, 3),
      controller.submit(0, 3),
    ]);
    expect(server.requests.filter((r) => r.includes("selection"))).toHaveLength(1);
    expect([first.changed, second.changed].filter(Boolean)).toHaveLength(1);
    expect(server.scenes[0]!.selected_index).toBe(3);
  });

  it("never leaves an unconfirmed highlight after reconciliation", async () => {
    const { controller, events } = setup();
    await controller.submit(0, 1);
    await controller.submit(0, 4);
    for (const event of events) {
      if (event.view.optimistic === null) {
        // every settled state must be a server-confirmed one
        expect([null, 1, 4]).toContain(event.view.confirmed);
      }
    }
    expect(controller.view(0)).toEqual({ confirmed: 4, optimistic: null });
  });
});
