/** Page bootstrap: fetch the spec from the same origin, then render. */

import { fetchSpec } from "./api.js";
import { BallotSession } from "./session.js";
import { render } from "./ui.js";

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  try {
    const spec = await fetchSpec("");
    render(root, new BallotSession(spec), { baseUrl: "" });
  } catch (err) {
    root.textContent = `The ballot could not load: ${
      err instanceof Error ? err.message : String(err)
    }`;
  }
}

document.addEventListener("DOMContentLoaded", () => {
  void start();
});
