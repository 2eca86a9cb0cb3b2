// Study flow orchestration: instruction -> capture/predict -> rated
// recommendations -> self-annotation, ten times, then a summary.

import { ApiClient, AffectPrediction, RatingsSummary } from "./api";
import { StudySession, STUDY_EMOTIONS } from "./session";
import { AnnotateView } from "./views/annotate";
import { CaptureView } from "./views/capture";
import { RecommendView } from "./views/recommend";

export class StudyApp {
  readonly el: HTMLElement;
  readonly capture: CaptureView;
  readonly recommend: RecommendView;
  readonly annotate: AnnotateView;
  session: StudySession;

  private instruction: HTMLElement;
  private progress: HTMLElement;
  private summaryEl: HTMLElement;
  private prediction: AffectPrediction | null = null;
  private pendingRating = 0;

  constructor(
    private api: ApiClient,
    sessionId?: string,
  ) {
    this.session = new StudySession(sessionId);
    this.el = document.createElement("main");
    this.el.className = "study-app";

    this.progress = document.createElement("div");
    this.progress.className = "progress";

    this.instruction = document.createElement("h1");
    this.instruction.className = "instruction";

    this.capture = new CaptureView(api);
    this.recommend = new RecommendView();
    this.annotate = new AnnotateView();

    this.summaryEl = document.createElement("section");
    this.summaryEl.className = "summary";
    this.summaryEl.hidden = true;

    this.el.append(
      this.progress,
      this.instruction,
      this.capture.el,
      this.recommend.el,
      this.annotate.el,
      this.summaryEl,
    );

    this.capture.onPredicted = (pred) => void this.handlePrediction(pred);
    this.recommend.onRetry = () => void this.fetchRecommendations();
    this.recommend.onSubmit = (rating) => {
      this.pendingRating = rating;
      this.annotate.show();
    };
    this.annotate.onSubmit = (valence, arousal) => void this.handleAnnotation(valence, arousal);

    this.renderStep();
  }

  private renderStep(): void {
    const emotion = this.session.currentEmotion;
    if (emotion === null) {
      void this.renderSummary();
      return;
    }
    this.progress.textContent = `Step ${this.session.stepIndex + 1} of ${this.session.stepCount}`;
    this.instruction.textContent = `Please emulate: ${emotion}`;
    this.capture.reset();
    this.recommend.reset();
    this.annotate.reset();
    this.prediction = null;
    this.pendingRating = 0;
  }

  private async handlePrediction(pred: AffectPrediction): Promise<void> {
    this.prediction = pred;
    await this.fetchRecommendations();
  }

  private async fetchRecommendations(): Promise<void> {
    if (!this.prediction) return;
    try {
      const rec = await this.api.recommend({
        emotion: this.prediction.emotion,
        valence: this.prediction.valence,
        arousal: this.prediction.arousal,
      });
      this.recommend.showTracks(rec.tracks);
    } catch (err) {
      this.recommend.showError(err instanceof Error ? err.message : String(err));
    }
  }

  private async handleAnnotation(valence: number, arousal: number): Promise<void> {
    if (!this.prediction || this.pendingRating < 1) return;
    const record = this.session.buildRecord({
      rating: this.pendingRating,
      self_valence: valence,
      self_arousal: arousal,
      track_ids: this.recommend.trackIds,
      predicted: {
        emotion: this.prediction.emotion,
        valence: this.prediction.valence,
        arousal: this.prediction.arousal,
      },
    });
    try {
      await this.api.postRating(record);
    } catch (err) {
      this.capture.showError(
        `could not store the rating: ${err instanceof Error ? err.message : String(err)}`,
      );
      return;
    }
    this.session.submitStep(record);
    this.renderStep();
  }

  private async renderSummary(): Promise<void> {
    this.progress.textContent = "Study complete";
    this.instruction.textContent = "Thank you!";
    this.capture.el.hidden = true;
    this.recommend.reset();
    this.annotate.reset();
    this.summaryEl.hidden = false;
    this.summaryEl.replaceChildren();

    let summary: RatingsSummary;
    try {
      summary = await this.api.ratingsSummary();
    } catch (err) {
      const failed = document.createElement("p");
      failed.className = "error-banner";
      failed.textContent = `summary unavailable: ${err instanceof Error ? err.message : String(err)}`;
      this.summaryEl.appendChild(failed);
      return;
    }

    const table = document.createElement("table");
    table.className = "summary-table";
    const header = document.createElement("tr");
    for (const text of ["Emotion", "Mean rating", "Count"]) {
      const th = document.createElement("th");
      th.textContent = text;
      header.appendChild(th);
    }
    table.appendChild(header);
    for (const emotion of STUDY_EMOTIONS) {
      const cell = summary.emotions[emotion];
      const row = document.createElement("tr");
      for (const text of [
        emotion,
        cell?.mean_rating != null ? cell.mean_rating.toFixed(1) : "–",
        String(cell?.count ?? 0),
      ]) {
        const td = document.createElement("td");
        td.textContent = text;
        row.appendChild(td);
      }
      table.appendChild(row);
    }
    const overall = document.createElement("tr");
    overall.className = "summary-overall";
    for (const text of [
      "average",
      summary.overall.mean_rating != null ? summary.overall.mean_rating.toFixed(1) : "–",
      String(summary.overall.count),
    ]) {
      const td = document.createElement("td");
      td.textContent = text;
      overall.appendChild(td);
    }
    table.appendChild(overall);
    this.summaryEl.appendChild(table);
  }
}
