/** Per-genre progress and thematic summaries. */

import { clear, el } from "./dom.js";
import { ThemeEntry } from "./types.js";

export class ThemesPanel {
  readonly root: HTMLElement;
  private list: HTMLElement;

  constructor() {
    this.root = el("div", "themes-panel panel");
    this.root.appendChild(el("h2", "", "Theme coverage"));
    this.list = el("div", "theme-list");
    this.root.appendChild(this.list);
  }

  render(themes: ThemeEntry[]): void {
    clear(this.list);
    for (const entry of themes) {
      const item = el("div", "theme-item");
      const header = el("div", "theme-header");
      header.appendChild(el("span", "theme-name", entry.theme.replace("_", " ")));
      header.appendChild(
        el("span", "theme-counts", `${entry.answered} answered / ${entry.unanswered_bank} in bank`)
      );
      item.appendChild(header);
      if (entry.summary) {
        const summary = el("div", "theme-summary", entry.summary);
        if (entry.stale) summary.classList.add("stale");
        item.appendChild(summary);
      }
      this.list.appendChild(item);
    }
  }
}
