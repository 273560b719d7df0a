// Entry point: "#/chat" runs the patient interview, "#/review/<session>"
// opens the physician view for a finished session.

import { ApiClient } from "./api.js";
import { ChatView } from "./chat.js";
import { ReportView } from "./report.js";

function mount(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const api = new ApiClient("");
  const hash = window.location.hash;
  const review = hash.match(/^#\/review\/(.+)$/);
  if (review) {
    const view = new ReportView(root, api);
    void view.load(decodeURIComponent(review[1]));
  } else {
    const view = new ChatView(root, api);
    void view.start();
  }
}

window.addEventListener("hashchange", mount);
mount();
