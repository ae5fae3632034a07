import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { ResultTableJson, TraceVersionJson } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixtureText(name: string): string {
  return readFileSync(join(here, "fixtures", name), "utf-8");
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export const traceV1 = (): TraceVersionJson => fixtureJson("case1_trace_v1.json");
export const traceV2 = (): TraceVersionJson => fixtureJson("case1_trace_v2.json");
export const stepS1 = (): ResultTableJson => fixtureJson("case1_step_S1.json");
export const stepS3 = (): ResultTableJson => fixtureJson("case1_step_S3.json");
export const stepS5 = (): ResultTableJson => fixtureJson("case1_step_S5.json");
