/**
 * Browser bootstrap: wires the chat session and render model to the DOM.
 * All logic worth testing lives in chat.ts / render.ts; this file only moves
 * strings between the page and the session.
 */

import { GragClient } from './api';
import { ChatSession } from './chat';
import { renderSession } from './render';

const SERVICE_URL = (window as { GRAG_SERVICE_URL?: string }).GRAG_SERVICE_URL ?? '';

function userId(): string {
  const key = 'grag-user-id';
  let id = localStorage.getItem(key);
  if (!id) {
    id = `web-${Math.random().toString(36).slice(2, 10)}`;
    localStorage.setItem(key, id);
  }
  return id;
}

export function mount(root: HTMLElement): void {
  const chat = new ChatSession(new GragClient(SERVICE_URL), userId());
  root.innerHTML = `
    <div id="log"></div>
    <form id="ask">
      <select id="language">
        <option value="">default</option>
        <option value="en">English</option>
        <option value="it">Italiano</option>
      </select>
      <input id="question" placeholder="Ask about energy efficiency…" autocomplete="off">
      <button type="submit">Send</button>
    </form>`;
  const log = root.querySelector('#log') as HTMLElement;
  const form = root.querySelector('#ask') as HTMLFormElement;
  const input = root.querySelector('#question') as HTMLInputElement;
  const language = root.querySelector('#language') as HTMLSelectElement;

  const redraw = () => {
    log.innerHTML = renderSession(chat.turns);
    input.disabled = chat.inputDisabled;
  };

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (!input.value.trim()) {
      return;
    }
    chat.language = language.value;
    const pending = chat.sendQuestion(input.value);
    input.value = '';
    redraw();
    void pending.then(redraw);
  });

  log.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.matches('button.retry')) {
      void chat.retry(Number(target.dataset.turn)).then(redraw);
      redraw();
    }
  });

  void chat.loadProfile().then(redraw, redraw);
}

const root = document.getElementById('app');
if (root) {
  mount(root);
}
