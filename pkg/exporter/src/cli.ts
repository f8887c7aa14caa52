#!/usr/bin/env node
/**
 * CLI: `lstmcov-export export <source> <dest>`
 *
 * <source> is a tfjs model.json (or a directory containing one); <dest> is
 * the weight file to write.  The manifest lands at <dest>.manifest.json.
 * Exit codes: 0 success, 1 conversion or IO failure, 2 usage error.
 */

import { pathToFileURL } from "node:url";

import { exportModel, manifestPath } from "./export.js";

const USAGE = "usage: lstmcov-export export <source-model.json> <dest-weights.json>";

export async function run(argv: string[]): Promise<number> {
  if (argv.length !== 3 || argv[0] !== "export") {
    console.error(USAGE);
    return 2;
  }
  const [, source, dest] = argv;
  try {
    await exportModel(source, dest);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
  console.log(`wrote ${dest}`);
  console.log(`wrote ${manifestPath(dest)}`);
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
