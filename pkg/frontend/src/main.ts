// DOM bootstrap: wires the stores to the page. Logic lives in the imported
// modules; this file only moves strings into elements and events back.

import { ApiClient } from "./api.js";
import { ChatStore } from "./chat.js";
import { EfDialogue, renderEfTable } from "./ef.js";
import { EF_ATTRIBUTES } from "./types.js";
import { renderConversation } from "./view.js";

const backendUrl =
  new URLSearchParams(window.location.search).get("backend") ?? "";
const api = new ApiClient(backendUrl);

// --- chat pane ----------------------------------------------------------------

const chat = new ChatStore(api, window.localStorage);
const conversation = document.getElementById("conversation") as HTMLElement;
const input = document.getElementById("chat-input") as HTMLInputElement;
const send = document.getElementById("chat-send") as HTMLButtonElement;

function repaintChat(): void {
  conversation.innerHTML = renderConversation(chat.turns);
  input.disabled = chat.busy;
  send.disabled = chat.busy;
  conversation.scrollTop = conversation.scrollHeight;
}

chat.onChange(repaintChat);

send.addEventListener("click", () => {
  const text = input.value;
  input.value = "";
  void chat.submit(text);
});
input.addEventListener("keydown", (event) => {
  if (event.key === "Enter" && !chat.busy) {
    const text = input.value;
    input.value = "";
    void chat.submit(text);
  }
});
conversation.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const retry = target.getAttribute("data-retry");
  if (retry !== null) void chat.retry(Number(retry));
});

// --- EF recommendation pane ---------------------------------------------------------

const ef = new EfDialogue(api);
const efResult = document.getElementById("ef-result") as HTMLElement;
const efSubmit = document.getElementById("ef-submit") as HTMLButtonElement;

function repaintEf(): void {
  for (const name of EF_ATTRIBUTES) {
    const field = document.getElementById(`ef-${name}`) as HTMLInputElement;
    field.classList.toggle("missing", ef.isHighlighted(name));
  }
  if (ef.error !== null) {
    efResult.innerHTML = `<p class="ef-error" role="alert">${ef.error}</p>`;
  } else if (ef.highlighted.length > 0) {
    efResult.innerHTML = `<p class="ef-hint">Please fill in: ${ef.highlighted.join(", ")}</p>`;
  } else if (ef.submitted) {
    efResult.innerHTML = renderEfTable(ef.recommendations);
  }
}

efSubmit.addEventListener("click", () => {
  for (const name of EF_ATTRIBUTES) {
    const field = document.getElementById(`ef-${name}`) as HTMLInputElement;
    ef.setField(name, field.value);
  }
  void ef.submit().then(repaintEf);
});

repaintChat();
