// Optimistic selection with server reconciliation.
//
// The tile highlight may show an optimistic choice while a POST is in
// flight, but once the round-trip finishes the rendered state always equals
// what the server confirmed: an ack reconciles to the server's index, an
// error reverts to the last confirmed one.

import { ApiClient, ApiError } from "./api.js";

export interface SelectionView {
  confirmed: number | null; // last server-confirmed index
  optimistic: number | null; // in-flight choice, shown highlighted
}

export type SelectionListener = (sceneIndex: number, view: SelectionView) => void;

export interface SubmitOutcome {
  changed: boolean;
  error?: string;
}

export class SelectionController {
  private views = new Map<number, SelectionView>();
  private inFlight = new Map<number, number>(); // scene -> candidate being posted

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: SelectionListener,
  ) {}

  seed(sceneIndex: number, confirmed: number | null): void {
    this.views.set(sceneIndex, { confirmed, optimistic: null });
  }

  view(sceneIndex: number): SelectionView {
    return this.views.get(sceneIndex) ?? { confirmed: null, optimistic: null };
  }

  /** The index the UI should highlight right now. */
  highlighted(sceneIndex: number): number | null {
    const v = this.view(sceneIndex);
    return v.optimistic !== null ? v.optimistic : v.confirmed;
  }

  async submit(sceneIndex: number, candidateIndex: number): Promise<SubmitOutcome> {
    const current = this.view(sceneIndex);
    // Re-picking the confirmed candidate, or double-activating while the
    // same choice is in flight, is a no-op: one state change per decision.
    if (current.confirmed === candidateIndex && current.optimistic === null) {
      return { changed: false };
    }
    if (this.inFlight.get(sceneIndex) === candidateIndex) {
      return { changed: false };
    }

    this.inFlight.set(sceneIndex, candidateIndex);
    this.views.set(sceneIndex, { ...current, optimistic: candidateIndex });
    this.onChange(sceneIndex, this.view(sceneIndex));

    try {
      const ack = await this.api.postSelection(sceneIndex, candidateIndex);
      // Reconcile with the server's answer, not our request.
      this.views.set(sceneIndex, { confirmed: ack.selected_index, optimistic: null });
      this.onChange(sceneIndex, this.view(sceneIndex));
      return { changed: true };
    } catch (err) {
      this.views.set(sceneIndex, { confirmed: current.confirmed, optimistic: null });
      this.onChange(sceneIndex, this.view(sceneIndex));
      const message = err instanceof ApiError ? err.message : String(err);
      return { changed: false, error: message };
    } finally {
      if (this.inFlight.get(sceneIndex) === candidateIndex) {
        this.inFlight.delete(sceneIndex);
      }
    }
  }
}
