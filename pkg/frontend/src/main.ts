import { loadArtifact, validateSweep } from "./artifact.js";
import { render, renderSweepSummary } from "./render.js";
import { SchemaError } from "./schema.js";

function usage(): never {
  console.error(
    "usage: main.js render <artifact-dir> <out-dir>\n" +
      "       main.js validate <sweep-root>\n" +
      "       main.js sweep-figure <summary.csv> <out-dir>",
  );
  process.exit(2);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "render": {
        const [dir, out] = rest;
        if (!dir || !out) usage();
        const files = render(loadArtifact(dir), out);
        for (const f of files) console.log(f);
        return 0;
      }
      case "validate": {
        const [root] = rest;
        if (!root) usage();
        const dirs = validateSweep(root);
        console.log(`validated ${dirs.length} artifact directories`);
        return 0;
      }
      case "sweep-figure": {
        const [summary, out] = rest;
        if (!summary || !out) usage();
        console.log(renderSweepSummary(summary, out));
        return 0;
      }
      default:
        usage();
    }
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(main(process.argv.slice(2)));
}
