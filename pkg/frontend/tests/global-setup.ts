// Spawns the Python service with freshly initialized weights and the
// offline mock provider, for the end-to-end test.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type { TestProject } from "vitest/node";

const PYTHON = process.env.PYTHON ?? "python3";
const MANIFEST_HEADER = "path,bbox_x,bbox_y,bbox_w,bbox_h,emotion,valence,arousal\n";

let service: ChildProcess | undefined;
let workDir: string | undefined;

async function waitForHealth(base: string, timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${base}/v1/health`);
      if (resp.ok) {
        const body = await resp.json();
        if (body.models_loaded) return;
      }
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`service did not become healthy at ${base}: ${String(lastError)}`);
}

export default async function setup(project: TestProject): Promise<() => Promise<void>> {
  workDir = mkdtempSync(join(tmpdir(), "affectlite-e2e-"));
  const manifest = join(workDir, "empty.csv");
  writeFileSync(manifest, MANIFEST_HEADER);

  const classifier = join(workDir, "cls.afwt");
  const regressor = join(workDir, "reg.afwt");
  const trainArgs = (head: string, seed: string, out: string) => [
    "-m",
    "affectlite.cli",
    "train",
    "--arch",
    "arch1-alexnet",
    "--head",
    head,
    "--manifest",
    manifest,
    "--epochs",
    "0",
    "--seed",
    seed,
    "--out",
    out,
  ];
  execFileSync(PYTHON, trainArgs("emotion", "1", classifier), { stdio: "pipe" });
  execFileSync(PYTHON, trainArgs("va", "2", regressor), { stdio: "pipe" });

  const port = 8400 + Math.floor(Math.random() * 800);
  const ratings = join(workDir, "ratings.jsonl");
  service = spawn(
    PYTHON,
    [
      "-m",
      "affectlite.cli",
      "serve",
      "--classifier",
      classifier,
      "--regressor",
      regressor,
      "--port",
      String(port),
      "--ratings",
      ratings,
    ],
    {
      env: { ...process.env, RECOMMENDER_BASE_URL: "mock://catalog?seed=5" },
      stdio: ["ignore", "pipe", "pipe"],
    },
  );
  service.stderr?.on("data", (chunk: Buffer) => {
    const text = chunk.toString();
    if (text.includes("Error") || text.includes("Traceback")) {
      console.error(`[service] ${text}`);
    }
  });

  const baseUrl = `http://127.0.0.1:${port}`;
  await waitForHealth(baseUrl);
  project.provide("baseUrl", baseUrl);
  project.provide("ratingsPath", ratings);

  return async () => {
    service?.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 300));
    if (workDir) rmSync(workDir, { recursive: true, force: true });
  };
}

declare module "vitest" {
  export interface ProvidedContext {
    baseUrl: string;
    ratingsPath: string;
  }
}
