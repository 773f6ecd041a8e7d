// Entry point: pick (or create) a session, then mount the workbench.

import { HttpTransport } from "./api.js";
import { WorkbenchController } from "./controller.js";
import { mountWorkbench } from "./dom.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const transport = new HttpTransport("");

  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    const corpora = await transport.listCorpora();
    if (corpora.length === 0) {
      root.textContent = "no corpus registered on this server";
      return;
    }
    sessionId = await transport.createSession(corpora[0].name, {});
    params.set("session", sessionId);
    window.history.replaceState(null, "", `?${params.toString()}`);
  }

  const controller = new WorkbenchController(transport, sessionId);
  mountWorkbench(root, controller);
  await controller.start();
}

void boot().catch((error) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${error}`;
});
