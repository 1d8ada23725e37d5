import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { App, STATUS_POLL_MS } from "../src/app.js";
import { FakeServer, fakeObserverFactory, flush, makeScene } from "./helpers.js";

function setup(server: FakeServer) {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.append(root);
  const observers = fakeObserverFactory();
  const app = new App(root, new ApiClient(server.fetchLike), observers.factory);
  return { app, root, observers };
}

describe("App", () => {
  let app: App | null = null;

  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    app?.stop();
    app = null;
    vi.useRealTimers();
  });

  it("renders scene navigation and the first scene's gallery", async () => {
    const server = new FakeServer([makeScene(0, 3), makeScene(1, 3, 1)]);
    const ctx = setup(server);
    app = ctx.app;
    await app.start();
    expect(ctx.root.querySelectorAll(".scene-button")).toHaveLength(2);
    expect(ctx.root.querySelectorAll(".tile")).toHaveLength(3);
    // scene 1 already has a confirmed selection, marked in the nav
    expect(ctx.root.querySelectorAll(".scene-button")[1]!.textContent).toContain("✓");
  });

  it("polls status every 2 seconds", async () => {
    const server = new FakeServer([makeScene(0, 2)]);
    const ctx = setup(server);
    app = ctx.app;
    await app.start();
    const count = () => server.requests.filter((r) => r === "GET /api/status").length;
    const before = count();
    await vi.advanceTimersByTimeAsync(STATUS_POLL_MS);
    expect(count()).toBe(before + 1);
    await vi.advanceTimersByTimeAsync(STATUS_POLL_MS * 3);
    expect(count()).toBe(before + 4);
    expect(ctx.root.querySelector(".status-bar")!.textContent).toContain("story: done");
  });

  it("shows an error banner with retry when the API is unreachable", async () => {
    const server = new FakeServer([makeScene(0, 2)]);
    server.unreachable = true;
    const ctx = setup(server);
    app = ctx.app;
    await app.refreshScenes();
    expect(app.bannerVisible).toBe(true);
    expect(ctx.root.querySelector(".banner-text")!.textContent)
      .toContain("unreachable");
    // retry after the server comes back
    server.unreachable = false;
    (ctx.root.querySelector(".banner-retry") as HTMLButtonElement).click();
    await flush();
    expect(app.bannerVisible).toBe(false);
    expect(ctx.root.querySelectorAll(".tile")).toHaveLength(2);
  });

  it("selection via the app updates the server and the nav check", async () => {
    const server = new FakeServer([makeScene(0, 4)]);
    const ctx = setup(server);
    app = ctx.app;
    await app.start();
    await app.select(2);
    expect(server.scenes[0]!.selected_index).toBe(2);
    expect(ctx.root.querySelectorAll(".tile.selected")).toHaveLength(1);
    expect(ctx.root.querySelector(".scene-button")!.textContent).toContain("✓");
  });

  it("failed selection reverts and surfaces a banner", async () => {
    const server = new FakeServer([makeScene(0, 4, 1)]);
    const ctx = setup(server);
    app = ctx.app;
    await app.start();
    server.failNext = 400;
    await app.select(3);
    expect(app.bannerVisible).toBe(true);
    expect(server.scenes[0]!.selected_index).toBe(1);
    const selected = ctx.root.querySelector(".tile.selected") as HTMLElement;
    expect(selected.dataset.index).toBe("1");
  });

  it("regenerate refreshes the scene with appended candidates", async () => {
    const server = new FakeServer([makeScene(0, 3)]);
    const ctx = setup(server);
    app = ctx.app;
    await app.start();
    await app.regenerate(5);
    expect(ctx.root.querySelectorAll(".tile")).toHaveLength(8);
  });
});
