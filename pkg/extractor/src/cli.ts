#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { extractSslFeatures } from "./extract";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .usage("$0 <in-wav> <out-path>", "Extract encoder features into a .ksvc file", (y) =>
      y
        .positional("in-wav", { type: "string", demandOption: true, describe: "input WAV file" })
        .positional("out-path", { type: "string", demandOption: true, describe: "output .ksvc file" }),
    )
    .option("model", {
      type: "string",
      demandOption: true,
      describe: "path to the encoder ONNX model",
    })
    .option("layer", {
      type: "number",
      default: 6,
      describe: "encoder layer to emit (for models exporting several)",
    })
    .option("device", {
      type: "string",
      default: "cpu",
      choices: ["cpu", "cuda"],
      describe: "execution device",
    })
    .strict()
    .help()
    .parse();

  const result = await extractSslFeatures(argv["in-wav"] as string, argv["out-path"] as string, {
    modelPath: argv.model,
    layer: argv.layer,
    device: argv.device,
  });
  process.stdout.write(
    `extracted ${result.frames} frames (D=${result.dim}) -> ${argv["out-path"]}\n`,
  );
  return 0;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exit(1);
  });
