/**
 * Minimal loader for watguard-hardened modules.
 *
 * Instantiates a binary module with the import object built by the emitted
 * glue script, invokes one export, and reports the result or the runtime's
 * trap message. Text-to-binary conversion is the caller's concern.
 */

import { readFileSync } from "fs";
import { resolve } from "path";

export interface HarnessOptions {
  /** Pin the glue's env.time to a fixed value for reproducible runs. */
  time?: number;
}

export interface HarnessOutcome {
  ok: boolean;
  /** i32 results as signed numbers; empty for void exports. */
  values: number[];
  trapMessage?: string;
}

interface GlueModule {
  createImports(opts?: { time?: number }): WebAssembly.Imports;
}

export function loadImports(
  gluePath: string,
  options: HarnessOptions = {},
): WebAssembly.Imports {
  // eslint-disable-next-line @typescript-eslint/no-var-requires
  const glue = require(resolve(gluePath)) as Partial<GlueModule>;
  if (typeof glue.createImports !== "function") {
    throw new Error(`glue file ${gluePath} does not export createImports()`);
  }
  return glue.createImports(
    options.time !== undefined ? { time: options.time } : {},
  );
}

export function instantiate(
  modulePath: string,
  gluePath: string,
  options: HarnessOptions = {},
): WebAssembly.Instance {
  const bytes = readFileSync(modulePath);
  const module = new WebAssembly.Module(bytes);
  // Link failures propagate verbatim.
  return new WebAssembly.Instance(module, loadImports(gluePath, options));
}

export function writeMemory(
  instance: WebAssembly.Instance,
  address: number,
  bytes: Uint8Array,
): void {
  const memory = instance.exports.memory;
  if (!(memory instanceof WebAssembly.Memory)) {
    throw new Error("module does not export its memory");
  }
  new Uint8Array(memory.buffer).set(bytes, address);
}

export function harnessRun(
  modulePath: string,
  gluePath: string,
  exportName: string,
  args: number[] = [],
  options: HarnessOptions = {},
): HarnessOutcome {
  const instance = instantiate(modulePath, gluePath, options);
  return invokeExport(instance, exportName, args);
}

export function invokeExport(
  instance: WebAssembly.Instance,
  exportName: string,
  args: number[] = [],
): HarnessOutcome {
  const fn = instance.exports[exportName];
  if (typeof fn !== "function") {
    throw new Error(`no exported function named ${exportName}`);
  }
  try {
    const result = (fn as (...xs: number[]) => number | undefined)(...args);
    return { ok: true, values: result === undefined ? [] : [result | 0] };
  } catch (err) {
    if (err instanceof WebAssembly.RuntimeError) {
      return { ok: false, values: [], trapMessage: err.message };
    }
    throw err;
  }
}

/** Render an outcome the way the mini-interpreter CLI prints values. */
export function formatValues(outcome: HarnessOutcome): string {
  return outcome.values.join(" ");
}
