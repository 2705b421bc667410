import { EngineClient } from "./client.js";
import { mount } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const bridge = params.get("bridge") ?? "http://127.0.0.1:8080";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}
mount(root, new EngineClient(bridge));
