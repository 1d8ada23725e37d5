// Test doubles: an in-memory server that honors the curation API contract
// (selection acks reflect stored state; a changed selection invalidates that
// scene's render and no other), and a manually triggered observer standing
// in for IntersectionObserver.

import { Candidate, SceneState } from "../src/api.js";
import { ObserverFactory, ObserverLike } from "../src/gallery.js";

export interface ServerScene extends SceneState {
  rendered: string | null;
}

export function makeCandidate(scene: number, i: number): Candidate {
  return {
    content_hash: `hash-${scene}-${i}`,
    path: `assets/aa/hash-${scene}-${i}.png`,
    width: 512,
    height: 512,
    nsfw_flagged: false,
    url: `/assets/aa/hash-${scene}-${i}.png`,
  };
}

export function makeScene(index: number, nCandidates: number,
                          selected: number | null = null): ServerScene {
  return {
    scene_index: index,
    sentence_index: index,
    sentence_text: `Sentence number ${index}.`,
    description: `illustration of: Sentence number ${index}.`,
    status: nCandidates === 0 ? "generating"
      : selected !== null ? "selected" : "awaiting_selection",
    selected_index: selected,
    candidates: Array.from({ length: nCandidates }, (_, i) => makeCandidate(index, i)),
    rendered: null,
  };
}

export class FakeServer {
  requests: string[] = [];
  failNext: number | null = null; // HTTP status to fail the next request with
  unreachable = false;

  constructor(public scenes: ServerScene[]) {}

  fetchLike = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${input}`);
    if (this.unreachable) {
      throw new TypeError("fetch failed: connection refused");
    }
    if (this.failNext !== null) {
      const status = this.failNext;
      this.failNext = null;
      return jsonResponse({ detail: `injected ${status}` }, status);
    }

    const selection = input.match(/^\/api\/scenes\/(\d+)\/selection$/);
    if (selection && method === "POST") {
      const sceneIndex = Number(selection[1]);
      const scene = this.scenes[sceneIndex];
      if (!scene) return jsonResponse({ detail: "no such scene" }, 404);
      const body = JSON.parse(String(init?.body ?? "{}"));
      const idx = body.index as number;
      if (idx < 0 || idx >= scene.candidates.length) {
        return jsonResponse({ detail: "candidate index out of range" }, 400);
      }
      if (scene.selected_index !== null && scene.selected_index !== idx) {
        scene.rendered = null; // changed selection invalidates this render only
      }
      scene.selected_index = idx;
      scene.status = "selected";
      return jsonResponse({ scene_index: sceneIndex, selected_index: idx,
                            status: "selected" });
    }

    const regenerate = input.match(/^\/api\/scenes\/(\d+)\/regenerate$/);
    if (regenerate && method === "POST") {
      const sceneIndex = Number(regenerate[1]);
      const scene = this.scenes[sceneIndex];
      if (!scene) return jsonResponse({ detail: "no such scene" }, 404);
      const body = JSON.parse(String(init?.body ?? "{}"));
      const start = scene.candidates.length;
      for (let i = 0; i < (body.count as number); i++) {
        scene.candidates.push(makeCandidate(sceneIndex, start + i));
      }
      return jsonResponse({ scene_index: sceneIndex,
                            candidates: scene.candidates,
                            selected_index: scene.selected_index,
                            status: scene.status });
    }

    if (input === "/api/scenes") {
      return jsonResponse({
        scenes: this.scenes.map(({ rendered: _r, ...rest }) => rest),
      });
    }
    if (input === "/api/status") {
      const selected = this.scenes.filter((s) => s.selected_index !== null).length;
      return jsonResponse({
        stages: { story: "done", candidates: "done", selection: "pending" },
        scene_count: this.scenes.length,
        scenes_selected: selected,
        all_selected: selected === this.scenes.length,
      });
    }
    return jsonResponse({ detail: `no route ${method} ${input}` }, 404);
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class FakeObserver implements ObserverLike {
  observed: Element[] = [];

  constructor(private readonly onVisible: (els: Element[]) => void) {}

  observe(el: Element): void {
    this.observed.push(el);
  }

  disconnect(): void {
    this.observed = [];
  }

  /** Report every observed element as visible (tiles on the current page). */
  triggerAll(): void {
    this.onVisible([...this.observed]);
  }

  /** Report only some observed elements as visible. */
  trigger(els: Element[]): void {
    this.onVisible(els);
  }
}

export function fakeObserverFactory(): {
  factory: ObserverFactory;
  latest: () => FakeObserver;
} {
  let current: FakeObserver | null = null;
  return {
    factory: (onVisible) => {
      current = new FakeObserver(onVisible);
      return current;
    },
    latest: () => {
      if (!current) throw new Error("no observer created yet");
      return current;
    },
  };
}

export function pressKey(target: HTMLElement, key: string): void {
  target.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }));
}

export async function flush(): Promise<void> {
  for (let i = 0; i < 10; i++) {
    await Promise.resolve();
  }
}
