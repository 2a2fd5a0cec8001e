import { ApiClient } from "./api.js";
import { GameUI } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "";
const participant = params.get("participant") ?? `anon-${Date.now()}`;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const ui = new GameUI(root, new ApiClient(baseUrl));
void ui.start(participant);
