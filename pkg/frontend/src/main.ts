import "./style.css";
import { ApiClient } from "./api";
import { StudyApp } from "./app";

const api = new ApiClient("");
const root = document.querySelector<HTMLDivElement>("#root")!;

async function boot(): Promise<void> {
  try {
    const health = await api.health();
    if (!health.models_loaded) {
      const warn = document.createElement("p");
      warn.className = "error-banner";
      warn.textContent =
        "The service is up but no models are loaded; start it with --classifier and --regressor.";
      root.appendChild(warn);
    }
  } catch {
    const warn = document.createElement("p");
    warn.className = "error-banner";
    warn.textContent = "Cannot reach the prediction service under /v1.";
    root.appendChild(warn);
  }
  root.appendChild(new StudyApp(api).el);
}

void boot();
