// Recommendation view: the top tracks for the predicted affect with a
// five-star rating widget. Submission is blocked until a star is chosen.

import type { Track } from "../api";

export class RecommendView {
  readonly el: HTMLElement;
  onSubmit: ((rating: number) => void) | null = null;
  onRetry: (() => void) | null = null;

  private trackList: HTMLOListElement;
  private starsEl: HTMLElement;
  private submitButton: HTMLButtonElement;
  private errorBanner: HTMLElement;
  private retryButton: HTMLButtonElement;
  private rating = 0;
  private tracks: Track[] = [];

  constructor() {
    this.el = document.createElement("section");
    this.el.className = "recommend-view";
    this.el.hidden = true;

    const heading = document.createElement("h2");
    heading.textContent = "Recommended songs";

    this.trackList = document.createElement("ol");
    this.trackList.className = "track-list";

    this.starsEl = document.createElement("div");
    this.starsEl.className = "stars";
    for (let value = 1; value <= 5; value++) {
      const star = document.createElement("button");
      star.type = "button";
      star.className = "star";
      star.dataset.value = String(value);
      star.textContent = "☆";
      star.setAttribute("aria-label", `${value} star${value > 1 ? "s" : ""}`);
      star.addEventListener("click", () => this.setRating(value));
      this.starsEl.appendChild(star);
    }

    this.submitButton = document.createElement("button");
    this.submitButton.type = "button";
    this.submitButton.className = "rating-submit";
    this.submitButton.textContent = "Submit rating";
    this.submitButton.disabled = true; // zero stars blocks submission
    this.submitButton.addEventListener("click", () => {
      if (this.rating > 0) this.onSubmit?.(this.rating);
    });

    this.errorBanner = document.createElement("div");
    this.errorBanner.className = "error-banner";
    this.errorBanner.hidden = true;

    this.retryButton = document.createElement("button");
    this.retryButton.type = "button";
    this.retryButton.className = "retry-button";
    this.retryButton.textContent = "Retry";
    this.retryButton.hidden = true;
    this.retryButton.addEventListener("click", () => {
      this.retryButton.hidden = true;
      this.errorBanner.hidden = true;
      this.onRetry?.();
    });

    this.el.append(heading, this.trackList, this.starsEl, this.submitButton, this.errorBanner, this.retryButton);
  }

  get currentRating(): number {
    return this.rating;
  }

  get trackIds(): string[] {
    return this.tracks.map((t) => t.id);
  }

  showTracks(tracks: Track[]): void {
    this.tracks = tracks;
    this.el.hidden = false;
    this.errorBanner.hidden = true;
    this.retryButton.hidden = true;
    this.trackList.replaceChildren();
    for (const track of tracks) {
      const item = document.createElement("li");
      item.className = "track";
      const link = document.createElement("a");
      link.href = track.external_url;
      link.target = "_blank";
      link.rel = "noopener";
      link.textContent = `${track.title} — ${track.artist}`;
      item.appendChild(link);
      this.trackList.appendChild(item);
    }
  }

  showError(message: string): void {
    this.el.hidden = false;
    this.errorBanner.textContent = message;
    this.errorBanner.hidden = false;
    this.retryButton.hidden = false;
  }

  setRating(value: number): void {
    this.rating = value;
    this.submitButton.disabled = value < 1;
    const stars = this.starsEl.querySelectorAll<HTMLButtonElement>(".star");
    stars.forEach((star, i) => {
      star.textContent = i < value ? "★" : "☆";
      star.classList.toggle("selected", i < value);
    });
  }

  reset(): void {
    this.rating = 0;
    this.tracks = [];
    this.el.hidden = true;
    this.submitButton.disabled = true;
    this.trackList.replaceChildren();
    this.starsEl.querySelectorAll<HTMLButtonElement>(".star").forEach((star) => {
      star.textContent = "☆";
      star.classList.remove("selected");
    });
    this.errorBanner.hidden = true;
    this.retryButton.hidden = true;
  }
}
