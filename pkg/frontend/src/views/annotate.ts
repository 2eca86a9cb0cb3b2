// Self-annotation view: valence and arousal sliders spanning [-1, 1],
// default 0, with live numeric readouts.

export class AnnotateView {
  readonly el: HTMLElement;
  onSubmit: ((valence: number, arousal: number) => void) | null = null;

  private valenceInput: HTMLInputElement;
  private arousalInput: HTMLInputElement;

  constructor() {
    this.el = document.createElement("section");
    this.el.className = "annotate-view";
    this.el.hidden = true;

    const heading = document.createElement("h2");
    heading.textContent = "How did your expression feel?";

    this.valenceInput = this.slider("valence", "negative", "positive");
    this.arousalInput = this.slider("arousal", "calm", "excited");

    const submit = document.createElement("button");
    submit.type = "button";
    submit.className = "annotate-submit";
    submit.textContent = "Save annotation";
    submit.addEventListener("click", () => {
      this.onSubmit?.(this.valence, this.arousal);
    });

    this.el.append(heading, this.valenceInput.closest(".slider-row")!, this.arousalInput.closest(".slider-row")!, submit);
  }

  private slider(name: string, lowLabel: string, highLabel: string): HTMLInputElement {
    const row = document.createElement("div");
    row.className = "slider-row";

    const label = document.createElement("label");
    label.textContent = name;
    label.htmlFor = `slider-${name}`;

    const low = document.createElement("span");
    low.className = "slider-end";
    low.textContent = lowLabel;

    const input = document.createElement("input");
    input.type = "range";
    input.id = `slider-${name}`;
    input.min = "-1";
    input.max = "1";
    input.step = "0.01";
    input.value = "0";

    const high = document.createElement("span");
    high.className = "slider-end";
    high.textContent = highLabel;

    const readout = document.createElement("output");
    readout.className = "slider-readout";
    readout.textContent = "0.00";
    input.addEventListener("input", () => {
      readout.textContent = Number(input.value).toFixed(2);
    });

    row.append(label, low, input, high, readout);
    return input;
  }

  get valence(): number {
    return Number(this.valenceInput.value);
  }

  get arousal(): number {
    return Number(this.arousalInput.value);
  }

  setValues(valence: number, arousal: number): void {
    this.valenceInput.value = String(valence);
    this.arousalInput.value = String(arousal);
    this.valenceInput.dispatchEvent(new Event("input"));
    this.arousalInput.dispatchEvent(new Event("input"));
  }

  show(): void {
    this.el.hidden = false;
  }

  reset(): void {
    this.setValues(0, 0);
    this.el.hidden = true;
  }
}
