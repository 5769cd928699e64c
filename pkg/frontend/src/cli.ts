#!/usr/bin/env node
/**
 * harness <module.wasm> <glue.js> <export> [args...] [--time N]
 *
 * Prints the returned values to stdout; on a trap prints the runtime's
 * message to stderr and exits nonzero.
 */

import { formatValues, harnessRun } from "./harness";

function usage(): never {
  console.error("usage: harness <module.wasm> <glue.js> <export> [args...] [--time N]");
  process.exit(2);
}

function main(argv: string[]): number {
  const positional: string[] = [];
  let time: number | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--time") {
      const raw = argv[++i];
      if (raw === undefined) usage();
      time = Number(raw) | 0;
    } else if (argv[i].startsWith("--")) {
      usage();
    } else {
      positional.push(argv[i]);
    }
  }
  if (positional.length < 3) usage();
  const [modulePath, gluePath, exportName, ...rest] = positional;
  const args = rest.map((x) => Number(x) | 0);

  const outcome = harnessRun(modulePath, gluePath, exportName, args, { time });
  if (!outcome.ok) {
    console.error(`trap: ${outcome.trapMessage}`);
    return 3;
  }
  const text = formatValues(outcome);
  if (text.length > 0) {
    console.log(text);
  }
  return 0;
}

try {
  process.exit(main(process.argv.slice(2)));
} catch (err) {
  console.error(String(err instanceof Error ? err.message : err));
  process.exit(1);
}
