import { Api } from "./api.js";
import { renderAndBind } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

// same-origin: the service serves this page and the API side by side
void renderAndBind(root, new Api(""));
