// End-to-end: the real views drive the real HTTP service (with its offline
// mock music provider) through a complete ten-step study session.

import { readFileSync } from "node:fs";

import { beforeAll, describe, expect, inject, it } from "vitest";

import { ApiClient } from "../src/api";
import { StudyApp } from "../src/app";
import { STUDY_EMOTIONS } from "../src/session";

// 1x1 PNG; the service crops/resizes whatever it receives.
const PNG_BASE64 =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg==";

function pngBlob(): Blob {
  const bytes = Uint8Array.from(atob(PNG_BASE64), (c) => c.charCodeAt(0));
  return new Blob([bytes], { type: "image/png" });
}

async function waitFor(check: () => boolean, what: string, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) return;
    await new Promise((r) => setTimeout(r, 40));
  }
  throw new Error(`timed out waiting for ${what}`);
}

const baseUrl = inject("baseUrl");
const ratingsPath = inject("ratingsPath");

describe("study flow against the live service", () => {
  let api: ApiClient;

  beforeAll(async () => {
    api = new ApiClient(baseUrl);
    const health = await api.health();
    expect(health.models_loaded).toBe(true);
  });

  it("completes ten steps and persists ten rating records", async () => {
    const app = new StudyApp(api, "e2e-session");
    document.body.appendChild(app.el);

    for (let step = 0; step < 10; step++) {
      const emotion = STUDY_EMOTIONS[step];
      await waitFor(
        () => app.el.querySelector(".instruction")?.textContent?.includes(emotion) ?? false,
        `instruction for ${emotion}`,
      );

      // capture: upload a photo and request the prediction
      const predictButton = app.el.querySelector<HTMLButtonElement>(".predict-button")!;
      expect(predictButton.disabled).toBe(true);
      app.capture.setFile(pngBlob());
      expect(predictButton.disabled).toBe(false);
      predictButton.click();

      // prediction panel fills in from the service response
      await waitFor(
        () => !app.el.querySelector<HTMLElement>(".affect-panel")!.hidden,
        "affect panel",
      );
      const panelText = app.el.querySelector<HTMLElement>(".affect-panel")!.textContent!;
      expect(panelText).toContain("Emotion");

      // five recommended tracks arrive
      await waitFor(
        () => app.el.querySelectorAll(".track").length === 5,
        "five recommended tracks",
      );
      const links = app.el.querySelectorAll<HTMLAnchorElement>(".track a");
      expect(links).toHaveLength(5);
      for (const link of links) expect(link.href).toMatch(/^https:/);

      // a star rating unlocks submission
      const submitRating = app.el.querySelector<HTMLButtonElement>(".rating-submit")!;
      expect(submitRating.disabled).toBe(true);
      const starIndex = step % 5; // ratings 1..5 across the session
      app.el.querySelectorAll<HTMLButtonElement>(".star")[starIndex].click();
      submitRating.click();

      // annotation sliders appear; move them and save
      await waitFor(
        () => !app.el.querySelector<HTMLElement>(".annotate-view")!.hidden,
        "annotation view",
      );
      app.annotate.setValues((step - 5) / 5, (5 - step) / 5);
      app.el.querySelector<HTMLButtonElement>(".annotate-submit")!.click();

      await waitFor(
        () => app.session.stepIndex === step + 1,
        `record ${step + 1} submitted`,
      );
    }

    expect(app.session.complete).toBe(true);
    expect(app.session.records).toHaveLength(10);

    // summary screen mirrors the per-emotion table
    await waitFor(
      () => app.el.querySelectorAll(".summary-table tr").length === 12,
      "summary table (header + 10 emotions + average)",
    );

    // the service really persisted ten line-delimited records
    const lines = readFileSync(ratingsPath, "utf-8").trim().split("\n");
    const records = lines.map((l) => JSON.parse(l));
    const mine = records.filter((r) => r.session_id === "e2e-session");
    expect(mine).toHaveLength(10);
    expect(mine.map((r) => r.instructed_emotion)).toEqual([...STUDY_EMOTIONS]);
    for (const rec of mine) {
      expect(rec.rating).toBeGreaterThanOrEqual(1);
      expect(rec.rating).toBeLessThanOrEqual(5);
      expect(rec.track_ids).toHaveLength(5);
      expect(Math.abs(rec.self_valence)).toBeLessThanOrEqual(1);
      expect(Math.abs(rec.self_arousal)).toBeLessThanOrEqual(1);
    }

    // and the summary endpoint aggregates them per instructed emotion
    const summary = await api.ratingsSummary();
    expect(Object.keys(summary.emotions)).toEqual([...STUDY_EMOTIONS]);
    expect(summary.overall.count).toBe(10);
    for (const emotion of STUDY_EMOTIONS) {
      expect(summary.emotions[emotion].count).toBe(1);
      expect(summary.emotions[emotion].mean_rating).toBeGreaterThanOrEqual(1);
    }
  });

  it("surfaces prediction errors inline", async () => {
    const app = new StudyApp(api, "e2e-errors");
    document.body.appendChild(app.el);
    app.capture.setFile(new Blob([new Uint8Array([1, 2, 3, 4])], { type: "image/png" }));
    await app.capture.submit();
    const banner = app.capture.el.querySelector<HTMLElement>(".error-banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("decode");
  });
});
