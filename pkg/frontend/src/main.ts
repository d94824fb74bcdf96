import { ReviewApi } from "./api.js";
import { startApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const token = new URLSearchParams(window.location.search).get("token") ?? undefined;
startApp(root, new ReviewApi("", token));
