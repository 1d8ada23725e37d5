// Candidate grid for one scene: paginated tiles, roving keyboard focus,
// lazily loaded thumbnails, full-size preview for the focused tile.
//
// Reviewing ~100 images per scene is the operator's dominant cost, so
// everything is reachable without the mouse: arrows move, Enter selects,
// PageUp/PageDown jump pages, n/p switch scenes, Home/End jump to the first
// and last candidate. Images are requested only when their tile is rendered
// on the current page AND reported visible by the intersection observer, so
// off-screen candidates cost no bandwidth.

import { SceneState } from "./api.js";

export const PAGE_SIZE = 24;
export const GRID_COLUMNS = 6;

export interface GalleryCallbacks {
  onActivate: (candidateIndex: number) => void;
  onPrevScene: () => void;
  onNextScene: () => void;
  onRegenerate: (count: number) => void;
}

export interface ObserverLike {
  observe(el: Element): void;
  disconnect(): void;
}

export type ObserverFactory = (onVisible: (els: Element[]) => void) => ObserverLike;

const defaultObserverFactory: ObserverFactory = (onVisible) => {
  const io = new IntersectionObserver((entries) => {
    const visible = entries.filter((e) => e.isIntersecting).map((e) => e.target);
    if (visible.length > 0) onVisible(visible);
  }, { rootMargin: "100px" });
  return { observe: (el) => io.observe(el), disconnect: () => io.disconnect() };
};

export class GalleryView {
  private scene: SceneState | null = null;
  private highlight: number | null = null;
  private focusIndex = 0;
  private page = 0;
  private observer: ObserverLike | null = null;
  private grid: HTMLElement;
  private header: HTMLElement;
  private preview: HTMLElement;
  private pageLabel: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly callbacks: GalleryCallbacks,
    private readonly observerFactory: ObserverFactory = defaultObserverFactory,
  ) {
    this.root.classList.add("gallery");
    this.root.tabIndex = 0;
    this.header = el("div", "gallery-header");
    this.grid = el("div", "gallery-grid");
    this.grid.setAttribute("role", "listbox");
    this.pageLabel = el("div", "gallery-page");
    this.preview = el("div", "gallery-preview");
    this.root.append(this.header, this.grid, this.pageLabel, this.preview);
    this.root.addEventListener("keydown", (e) => this.onKey(e));
  }

  render(scene: SceneState, highlight: number | null): void {
    this.scene = scene;
    this.highlight = highlight;
    if (this.focusIndex >= scene.candidates.length) this.focusIndex = 0;
    this.renderHeader();
    this.renderPage();
  }

  setHighlight(highlight: number | null): void {
    this.highlight = highlight;
    for (const tile of this.tiles()) {
      const idx = Number(tile.dataset.index);
      tile.classList.toggle("selected", idx === highlight);
      tile.setAttribute("aria-selected", String(idx === highlight));
    }
    this.renderHeader();
  }

  get currentPage(): number {
    return this.page;
  }

  get pageCount(): number {
    if (!this.scene) return 0;
    return Math.max(1, Math.ceil(this.scene.candidates.length / PAGE_SIZE));
  }

  focusedCandidate(): number {
    return this.focusIndex;
  }

  tiles(): HTMLElement[] {
    return Array.from(this.grid.querySelectorAll<HTMLElement>(".tile"));
  }

  private renderHeader(): void {
    if (!this.scene) return;
    const s = this.scene;
    const picked = this.highlight !== null ? `candidate ${this.highlight}` : "none";
    this.header.innerHTML = "";
    this.header.append(
      el("h2", "scene-title", `Scene ${s.scene_index + 1}: ${s.sentence_text}`),
      el("p", "scene-description", s.description ?? ""),
      el("p", "scene-meta",
        `${s.candidates.length} candidates · status ${s.status} · selected: ${picked}`),
    );
    const regen = el("button", "regen-button", "Regenerate 5 more") as HTMLButtonElement;
    regen.addEventListener("click", () => this.callbacks.onRegenerate(5));
    this.header.append(regen);
  }

  private renderPage(): void {
    if (!this.scene) return;
    this.observer?.disconnect();
    this.grid.innerHTML = "";
    const candidates = this.scene.candidates;

    if (candidates.length === 0) {
      const state = this.scene.status === "generating" ? "generating" : "empty";
      const waiting = el("div", "generating-state");
      waiting.append(el("div", "spinner"),
        el("p", "", state === "generating"
          ? "Generating candidates…" : "No candidates yet."));
      this.grid.append(waiting);
      this.pageLabel.textContent = "";
      this.preview.innerHTML = "";
      return;
    }

    this.page = Math.floor(this.focusIndex / PAGE_SIZE);
    const start = this.page * PAGE_SIZE;
    const pageItems = candidates.slice(start, start + PAGE_SIZE);

    this.observer = this.observerFactory((visible) => {
      for (const tileEl of visible) this.loadThumb(tileEl as HTMLElement);
    });

    pageItems.forEach((candidate, offset) => {
      const index = start + offset;
      const tile = el("div", "tile");
      tile.dataset.index = String(index);
      tile.tabIndex = -1;
      tile.setAttribute("role", "option");
      tile.setAttribute("aria-selected", String(index === this.highlight));
      if (index === this.highlight) tile.classList.add("selected");
      if (index === this.focusIndex) tile.classList.add("focused");

      const img = document.createElement("img");
      img.alt = `candidate ${index}`;
      img.dataset.src = candidate.url; // real src is set lazily
      if (candidate.nsfw_flagged) tile.classList.add("flagged");
      tile.append(img, el("span", "tile-index", String(index)));
      tile.addEventListener("click", () => {
        this.setFocus(index);
        this.callbacks.onActivate(index);
      });
      this.grid.append(tile);
      this.observer!.observe(tile);
    });

    this.pageLabel.textContent =
      this.pageCount > 1 ? `page ${this.page + 1} / ${this.pageCount}` : "";
    this.renderPreview();
  }

  private loadThumb(tile: HTMLElement): void {
    const img = tile.querySelector("img");
    if (img && !img.src && img.dataset.src) {
      img.src = img.dataset.src;
    }
  }

  private setFocus(index: number): void {
    if (!this.scene || this.scene.candidates.length === 0) return;
    const clamped = Math.max(0, Math.min(index, this.scene.candidates.length - 1));
    const pageChanged = Math.floor(clamped / PAGE_SIZE) !== this.page;
    this.focusIndex = clamped;
    if (pageChanged) {
      this.renderPage();
    } else {
      for (const tile of this.tiles()) {
        tile.classList.toggle("focused", Number(tile.dataset.index) === clamped);
      }
      this.renderPreview();
    }
  }

  private renderPreview(): void {
    if (!this.scene) return;
    const candidate = this.scene.candidates[this.focusIndex];
    this.preview.innerHTML = "";
    if (!candidate) return;
    // Full-size view of the focused (on-screen) tile only.
    const img = document.createElement("img");
    img.src = candidate.url;
    img.alt = `preview of candidate ${this.focusIndex}`;
    this.preview.append(
      img,
      el("p", "preview-meta",
        `candidate ${this.focusIndex} · ${candidate.width}x${candidate.height}`),
    );
  }

  private onKey(e: KeyboardEvent): void {
    if (!this.scene) return;
    const moves: Record<string, number> = {
      ArrowRight: 1,
      ArrowLeft: -1,
      ArrowDown: GRID_COLUMNS,
      ArrowUp: -GRID_COLUMNS,
      PageDown: PAGE_SIZE,
      PageUp: -PAGE_SIZE,
    };
    if (e.key in moves) {
      e.preventDefault();
      this.setFocus(this.focusIndex + (moves[e.key] ?? 0));
      return;
    }
    switch (e.key) {
      case "Home":
        e.preventDefault();
        this.setFocus(0);
        break;
      case "End":
        e.preventDefault();
        this.setFocus(this.scene.candidates.length - 1);
        break;
      case "Enter":
      case " ":
        e.preventDefault();
        if (this.scene.candidates.length > 0) {
          this.callbacks.onActivate(this.focusIndex);
        }
        break;
      case "n":
        this.callbacks.onNextScene();
        break;
      case "p":
        this.callbacks.onPrevScene();
        break;
    }
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
