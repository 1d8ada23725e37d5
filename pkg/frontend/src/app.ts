// Application shell: scene navigation, status polling, error banner.
// One operator assumed; state is refreshed by polling, not push.

import { ApiClient, ApiError, SceneState } from "./api.js";
import { GalleryView, ObserverFactory } from "./gallery.js";
import { SelectionController } from "./selection.js";

export const STATUS_POLL_MS = 2000;

export class App {
  readonly gallery: GalleryView;
  readonly selection: SelectionController;
  private scenes: SceneState[] = [];
  private currentScene = 0;
  private banner: HTMLElement;
  private statusBar: HTMLElement;
  private sceneNav: HTMLElement;
  private galleryHost: HTMLElement;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    observerFactory?: ObserverFactory,
  ) {
    this.banner = el("div", "banner hidden");
    this.statusBar = el("div", "status-bar");
    this.sceneNav = el("nav", "scene-nav");
    this.galleryHost = el("div", "gallery-host");
    root.append(this.banner, this.statusBar, this.sceneNav, this.galleryHost);

    this.selection = new SelectionController(this.api, (sceneIndex, view) => {
      const scene = this.scenes[sceneIndex];
      if (scene) {
        scene.selected_index = view.confirmed;
      }
      if (sceneIndex === this.currentScene) {
        this.gallery.setHighlight(
          view.optimistic !== null ? view.optimistic : view.confirmed);
      }
      this.renderSceneNav();
    });

    this.gallery = new GalleryView(this.galleryHost, {
      onActivate: (candidateIndex) => void this.select(candidateIndex),
      onNextScene: () => this.showScene(this.currentScene + 1),
      onPrevScene: () => this.showScene(this.currentScene - 1),
      onRegenerate: (count) => void this.regenerate(count),
    }, observerFactory);
  }

  async start(): Promise<void> {
    await this.refreshScenes();
    this.pollTimer = setInterval(() => void this.pollStatus(), STATUS_POLL_MS);
    await this.pollStatus();
  }

  stop(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.pollTimer = null;
  }

  async refreshScenes(): Promise<void> {
    try {
      const { scenes } = await this.api.getScenes();
      this.scenes = scenes;
      for (const scene of scenes) {
        this.selection.seed(scene.scene_index, scene.selected_index);
      }
      this.hideBanner();
      this.showScene(this.currentScene);
    } catch (err) {
      this.showBanner(err, () => void this.refreshScenes());
    }
  }

  showScene(index: number): void {
    if (this.scenes.length === 0) return;
    this.currentScene = Math.max(0, Math.min(index, this.scenes.length - 1));
    const scene = this.scenes[this.currentScene]!;
    this.gallery.render(scene, this.selection.highlighted(scene.scene_index));
    this.renderSceneNav();
  }

  async select(candidateIndex: number): Promise<void> {
    const outcome = await this.selection.submit(this.currentScene, candidateIndex);
    if (outcome.error) {
      this.showBanner(new Error(`Selection failed: ${outcome.error}`),
        () => this.hideBanner());
    }
  }

  async regenerate(count: number): Promise<void> {
    const sceneIndex = this.currentScene;
    try {
      await this.api.postRegenerate(sceneIndex, count);
      const { scenes } = await this.api.getScenes();
      this.scenes = scenes;
      if (this.currentScene === sceneIndex) this.showScene(sceneIndex);
    } catch (err) {
      this.showBanner(err, () => this.hideBanner());
    }
  }

  async pollStatus(): Promise<void> {
    try {
      const status = await this.api.getStatus();
      this.statusBar.innerHTML = "";
      for (const [stage, state] of Object.entries(status.stages)) {
        this.statusBar.append(el("span", `stage-chip stage-${state}`, `${stage}: ${state}`));
      }
      this.statusBar.append(el("span", "stage-chip progress",
        `${status.scenes_selected}/${status.scene_count} scenes selected`));
      this.hideBanner();
    } catch (err) {
      this.showBanner(err, () => void this.pollStatus());
    }
  }

  private renderSceneNav(): void {
    this.sceneNav.innerHTML = "";
    this.scenes.forEach((scene, i) => {
      const chosen = scene.selected_index !== null;
      const btn = el("button",
        `scene-button${i === this.currentScene ? " current" : ""}${chosen ? " done" : ""}`,
        `${i + 1}${chosen ? " ✓" : ""}`) as HTMLButtonElement;
      btn.addEventListener("click", () => this.showScene(i));
      this.sceneNav.append(btn);
    });
  }

  showBanner(err: unknown, retry: () => void): void {
    const message = err instanceof ApiError && err.status === null
      ? "Curation API unreachable. Is `storyreel serve` running?"
      : err instanceof Error ? err.message : String(err);
    this.banner.innerHTML = "";
    this.banner.append(el("span", "banner-text", message));
    const retryBtn = el("button", "banner-retry", "Retry") as HTMLButtonElement;
    retryBtn.addEventListener("click", retry);
    this.banner.append(retryBtn);
    this.banner.classList.remove("hidden");
  }

  hideBanner(): void {
    this.banner.classList.add("hidden");
    this.banner.innerHTML = "";
  }

  get bannerVisible(): boolean {
    return !this.banner.classList.contains("hidden");
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
