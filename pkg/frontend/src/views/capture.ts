// Capture-and-predict view: choose or take a photo, send it to /v1/predict,
// show the predicted emotion, valence and arousal. The photo is held only
// until prediction succeeds.

import { ApiClient, AffectPrediction } from "../api";

export class CaptureView {
  readonly el: HTMLElement;
  onPredicted: ((pred: AffectPrediction) => void) | null = null;

  private file: Blob | null = null;
  private fileInput: HTMLInputElement;
  private submitButton: HTMLButtonElement;
  private errorBanner: HTMLElement;
  private affectPanel: HTMLElement;
  private video: HTMLVideoElement | null = null;
  private stream: MediaStream | null = null;

  constructor(private api: ApiClient) {
    this.el = document.createElement("section");
    this.el.className = "capture-view";

    const controls = document.createElement("div");
    controls.className = "capture-controls";

    this.fileInput = document.createElement("input");
    this.fileInput.type = "file";
    this.fileInput.accept = "image/*";
    this.fileInput.addEventListener("change", () => {
      const chosen = this.fileInput.files?.[0] ?? null;
      this.setFile(chosen);
    });
    controls.appendChild(this.fileInput);

    const cameraSupported =
      typeof navigator !== "undefined" &&
      !!navigator.mediaDevices &&
      typeof navigator.mediaDevices.getUserMedia === "function";
    if (cameraSupported) {
      const cameraButton = document.createElement("button");
      cameraButton.type = "button";
      cameraButton.className = "camera-button";
      cameraButton.textContent = "Use camera";
      cameraButton.addEventListener("click", () => void this.toggleCamera());
      controls.appendChild(cameraButton);
    }

    this.submitButton = document.createElement("button");
    this.submitButton.type = "button";
    this.submitButton.className = "predict-button";
    this.submitButton.textContent = "Analyse photo";
    this.submitButton.disabled = true; // no image chosen yet
    this.submitButton.addEventListener("click", () => void this.submit());
    controls.appendChild(this.submitButton);

    this.errorBanner = document.createElement("div");
    this.errorBanner.className = "error-banner";
    this.errorBanner.hidden = true;

    this.affectPanel = document.createElement("div");
    this.affectPanel.className = "affect-panel";
    this.affectPanel.hidden = true;

    this.el.append(controls, this.errorBanner, this.affectPanel);
  }

  setFile(file: Blob | null): void {
    this.file = file;
    this.submitButton.disabled = file === null;
  }

  get hasImage(): boolean {
    return this.file !== null;
  }

  private async toggleCamera(): Promise<void> {
    if (this.stream) {
      this.takeSnapshot();
      return;
    }
    try {
      this.stream = await navigator.mediaDevices.getUserMedia({
        video: { facingMode: "user" },
      });
    } catch (err) {
      this.showError(`camera unavailable: ${String(err)}; use the file picker instead`);
      return;
    }
    this.video = document.createElement("video");
    this.video.autoplay = true;
    this.video.srcObject = this.stream;
    this.el.insertBefore(this.video, this.errorBanner);
  }

  private takeSnapshot(): void {
    if (!this.video || !this.stream) return;
    const canvas = document.createElement("canvas");
    canvas.width = this.video.videoWidth || 640;
    canvas.height = this.video.videoHeight || 480;
    canvas.getContext("2d")?.drawImage(this.video, 0, 0);
    canvas.toBlob((blob) => {
      if (blob) this.setFile(blob);
    }, "image/png");
    this.stream.getTracks().forEach((t) => t.stop());
    this.video.remove();
    this.video = null;
    this.stream = null;
  }

  showError(message: string): void {
    this.errorBanner.textContent = message;
    this.errorBanner.hidden = false;
  }

  clearError(): void {
    this.errorBanner.hidden = true;
    this.errorBanner.textContent = "";
  }

  async submit(): Promise<void> {
    if (!this.file) return;
    this.clearError();
    this.submitButton.disabled = true;
    try {
      const pred = await this.api.predict(this.file);
      this.renderAffect(pred);
      this.file = null; // sent once; nothing retained client-side
      this.fileInput.value = "";
      this.onPredicted?.(pred);
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
      this.submitButton.disabled = this.file === null;
    }
  }

  private renderAffect(pred: AffectPrediction): void {
    this.affectPanel.hidden = false;
    this.affectPanel.replaceChildren();
    const rows: Array<[string, string]> = [
      ["Emotion", pred.emotion],
      ["Valence", pred.valence.toFixed(2)],
      ["Arousal", pred.arousal.toFixed(2)],
    ];
    for (const [label, value] of rows) {
      const row = document.createElement("div");
      row.className = "affect-row";
      const name = document.createElement("span");
      name.className = "affect-label";
      name.textContent = label;
      const val = document.createElement("span");
      val.className = `affect-value affect-${label.toLowerCase()}`;
      val.textContent = value;
      row.append(name, val);
      this.affectPanel.appendChild(row);
    }
  }

  reset(): void {
    this.file = null;
    this.fileInput.value = "";
    this.submitButton.disabled = true;
    this.affectPanel.hidden = true;
    this.affectPanel.replaceChildren();
    this.clearError();
  }
}
