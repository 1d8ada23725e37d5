import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { FakeServer, makeScene } from "./helpers.js";

describe("ApiClient", () => {
  it("fetches scenes from the documented route", async () => {
    const server = new FakeServer([makeScene(0, 3), makeScene(1, 3)]);
    const client = new ApiClient(server.fetchLike);
    const { scenes } = await client.getScenes();
    expect(scenes).toHaveLength(2);
    expect(scenes[0]!.candidates).toHaveLength(3);
    expect(server.requests).toContain("GET /api/scenes");
  });

  it("posts selections as JSON bodies", async () => {
    const server = new FakeServer([makeScene(0, 3)]);
    const client = new ApiClient(server.fetchLike);
    const ack = await client.postSelection(0, 2);
    expect(ack.selected_index).toBe(2);
    expect(server.requests).toContain("POST /api/scenes/0/selection");
  });

  it("maps HTTP errors to ApiError with status and detail", async () => {
    const server = new FakeServer([makeScene(0, 3)]);
    const client = new ApiClient(server.fetchLike);
    await expect(client.postSelection(0, 99)).rejects.toMatchObject({
      name: "ApiError",
      status: 400,
    });
  });

  it("maps network failure to ApiError with null status", async () => {
    const server = new FakeServer([makeScene(0, 3)]);
    server.unreachable = true;
    const client = new ApiClient(server.fetchLike);
    try {
      await client.getStatus();
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBeNull();
    }
  });

  it("requests regeneration with a count", async () => {
    const server = new FakeServer([makeScene(0, 2)]);
    const client = new ApiClient(server.fetchLike);
    await client.postRegenerate(0, 5);
    expect(server.scenes[0]!.candidates).toHaveLength(7);
  });
});
