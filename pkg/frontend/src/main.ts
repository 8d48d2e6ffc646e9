/**
 * Entry point: mount the console on #app and poll while a session runs.
 *
 * The API base defaults to same-origin (the console is expected to sit
 * behind the same proxy as the API server); a data-api-base attribute on
 * the mount node overrides it for local development.
 */

import { ApiClient } from "./api.js";
import { mountConsole } from "./app.js";
import { ConsoleController } from "./controller.js";

const POLL_MS = 2000;

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount node");

const controller = new ConsoleController(new ApiClient(root.dataset["apiBase"] ?? ""));
mountConsole(root, controller);
controller.startPolling(POLL_MS);
