/** Shared test utilities: fixture loading and script replay. */

import { readFileSync } from "node:fs";

import {
  applyApi,
  applyGesture,
  initialState,
  type ApiInput,
  type Command,
  type ConsoleState,
  type Gesture,
} from "../src/state.js";

/** Parse a recorded API fixture. Re-reads on every call so no test can leak
 *  mutations into another through a shared object. */
export function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export type Step = { api: ApiInput } | { gesture: Gesture };

export interface RunResult {
  state: ConsoleState;
  commands: Command[];
  /** State after every step, for tests that assert mid-script. */
  trace: ConsoleState[];
}

export function runScript(steps: Step[]): RunResult {
  let state = initialState();
  const commands: Command[] = [];
  const trace: ConsoleState[] = [];
  for (const step of steps) {
    if ("api" in step) {
      state = applyApi(state, step.api);
    } else {
      const result = applyGesture(state, step.gesture);
      state = result.state;
      if (result.command) commands.push(result.command);
    }
    trace.push(state);
  }
  return { state, commands, trace };
}
