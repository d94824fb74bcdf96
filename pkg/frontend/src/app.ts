// Review console: a queue of flagged clusters on the left, the active
// cluster's evidence on the right, one server round-trip per decision.
// The client never computes a cost or picks a label on its own — every
// number and every state change on screen is read back from the service.

import { ApiError } from "./api.js";
import type {
  ActionBody,
  ActionOutcome,
  ClusterDetail,
  CostView,
  ReviewClient,
  SessionSnapshot,
} from "./api.js";
import { bindKeys } from "./keyboard.js";
import {
  completionLine,
  costLine,
  modeBadge,
  nextPending,
  orderQueue,
  progressLine,
  relativeLine,
} from "./viewmodel.js";
import type { ClusterSummary } from "./api.js";

const SHELL = `
<header class="topbar">
  <div>
    <h1>review queue</h1>
    <p id="progress" class="progress"></p>
  </div>
  <div class="meters">
    <p id="mode-badge" class="badge"></p>
    <p class="meter">cost <span id="cost-absolute"></span></p>
    <p id="cost-relative" class="meter-sub"></p>
  </div>
</header>
<div id="retry-banner" class="retry-banner" hidden>
  <span id="retry-message"></span>
  <button id="retry-btn" type="button">retry</button>
</div>
<main class="layout">
  <nav class="queue-pane">
    <ul id="queue-list" class="queue-list"></ul>
  </nav>
  <section id="detail" class="detail-pane" hidden>
    <div class="detail-head">
      <h2 id="detail-heading"></h2>
      <span id="detail-status" class="chip"></span>
    </div>
    <p class="modal-word" id="modal-word"></p>
    <p id="inline-error" class="inline-error" hidden></p>
    <h3>suggestions <span class="hint">press 1-5</span></h3>
    <ol id="suggestion-list" class="suggestions"></ol>
    <h3>type a label <span class="hint">press T, Enter submits, Esc backs out</span></h3>
    <input id="type-input" type="text" autocomplete="off" spellcheck="false"
           placeholder="correct word for the whole cluster" />
    <h3>members</h3>
    <div id="member-grid" class="member-grid"></div>
  </section>
  <section id="completion" class="detail-pane completion" hidden>
    <h2>session complete</h2>
    <p id="completion-line"></p>
    <p class="meter">final cost <span id="final-cost"></span></p>
    <p id="final-relative" class="meter-sub"></p>
    <a id="export-link" download="corrected.jsonl">download corrected corpus</a>
  </section>
</main>
<footer class="keys">
  <span><kbd>Enter</kbd> verify shown word</span>
  <span><kbd>1</kbd>-<kbd>5</kbd> pick suggestion</span>
  <span><kbd>T</kbd> type a label</span>
</footer>
`;

export interface AppHandle {
  /** Resolves once every in-flight server exchange has settled. */
  whenIdle(): Promise<void>;
  destroy(): void;
}

export function startApp(root: HTMLElement, api: ReviewClient): AppHandle {
  root.innerHTML = SHELL;

  const byId = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector<T>(`#${id}`);
    if (!el) {
      throw new Error(`shell is missing #${id}`);
    }
    return el;
  };

  const progressEl = byId<HTMLParagraphElement>("progress");
  const modeBadgeEl = byId<HTMLParagraphElement>("mode-badge");
  const costAbsoluteEl = byId<HTMLSpanElement>("cost-absolute");
  const costRelativeEl = byId<HTMLParagraphElement>("cost-relative");
  const retryBanner = byId<HTMLDivElement>("retry-banner");
  const retryMessage = byId<HTMLSpanElement>("retry-message");
  const retryBtn = byId<HTMLButtonElement>("retry-btn");
  const queueList = byId<HTMLUListElement>("queue-list");
  const detailPane = byId<HTMLElement>("detail");
  const detailHeading = byId<HTMLHeadingElement>("detail-heading");
  const detailStatus = byId<HTMLSpanElement>("detail-status");
  const modalWordEl = byId<HTMLParagraphElement>("modal-word");
  const inlineError = byId<HTMLParagraphElement>("inline-error");
  const suggestionList = byId<HTMLOListElement>("suggestion-list");
  const typeInput = byId<HTMLInputElement>("type-input");
  const memberGrid = byId<HTMLDivElement>("member-grid");
  const completionPane = byId<HTMLElement>("completion");
  const completionLineEl = byId<HTMLParagraphElement>("completion-line");
  const finalCostEl = byId<HTMLSpanElement>("final-cost");
  const finalRelativeEl = byId<HTMLParagraphElement>("final-relative");
  const exportLink = byId<HTMLAnchorElement>("export-link");

  let snapshot: SessionSnapshot | null = null;
  let queue: ClusterSummary[] = [];
  let active: ClusterDetail | null = null;

  let busy = 0;
  const idleWaiters: Array<() => void> = [];
  let retryWork: (() => Promise<void>) | null = null;

  function run(work: () => Promise<void>): void {
    busy += 1;
    work()
      .catch((err) => {
        retryWork = work;
        retryMessage.textContent =
          err instanceof Error ? `request failed: ${err.message}` : "request failed";
        retryBanner.hidden = false;
      })
      .finally(() => {
        busy -= 1;
        if (busy === 0) {
          for (const wake of idleWaiters.splice(0)) {
            wake();
          }
        }
      });
  }

  function whenIdle(): Promise<void> {
    if (busy === 0) {
      return Promise.resolve();
    }
    return new Promise((resolve) => idleWaiters.push(resolve));
  }

  function renderCost(cost: CostView): void {
    costAbsoluteEl.textContent = costLine(cost);
    costAbsoluteEl.dataset.seconds = String(cost.absolute_seconds);
    costRelativeEl.textContent = relativeLine(cost);
  }

  function renderSession(snap: SessionSnapshot): void {
    progressEl.textContent = progressLine(snap);
    modeBadgeEl.textContent = modeBadge(snap);
    renderCost(snap.cost);
  }

  function renderQueue(): void {
    queueList.replaceChildren(
      ...queue.map((cluster) => {
        const item = document.createElement("li");
        item.dataset.id = String(cluster.id);
        item.className = cluster.status;
        if (active && cluster.id === active.id) {
          item.classList.add("active");
        }
        const word = document.createElement("span");
        word.className = "queue-word";
        word.textContent = cluster.modal_prediction;
        const size = document.createElement("span");
        size.className = "queue-size";
        size.textContent = `×${cluster.size}`;
        item.append(word, size);
        item.addEventListener("click", () => run(() => open(cluster.id)));
        return item;
      }),
    );
  }

  function renderMembers(detail: ClusterDetail): void {
    memberGrid.replaceChildren(
      ...detail.members.map((member) => {
        const card = document.createElement("div");
        card.className = "member";
        const word = document.createElement("p");
        word.className = "member-word";
        word.textContent = member.prediction;
        card.append(word);
        if (member.image) {
          const thumb = document.createElement("img");
          thumb.className = "member-thumb";
          thumb.src = member.image;
          thumb.alt = `word image ${member.id}`;
          card.append(thumb);
        } else {
          const thumb = document.createElement("div");
          thumb.className = "member-thumb member-thumb-empty";
          thumb.textContent = "no image";
          card.append(thumb);
        }
        const meta = document.createElement("p");
        meta.className = "member-meta";
        meta.textContent =
          member.label === null ? member.id : `${member.id} → ${member.label} (${member.source})`;
        card.append(meta);
        return card;
      }),
    );
  }

  function renderDetail(detail: ClusterDetail): void {
    completionPane.hidden = true;
    detailPane.hidden = false;
    detailPane.dataset.clusterId = String(detail.id);
    detailHeading.textContent = `cluster ${detail.id} · ${detail.size} member${detail.size === 1 ? "" : "s"}`;
    detailStatus.textContent = detail.status;
    detailStatus.className = `chip ${detail.status}`;
    modalWordEl.textContent = detail.modal_prediction;
    suggestionList.replaceChildren(
      ...detail.suggestions.map((suggestion) => {
        const item = document.createElement("li");
        item.dataset.rank = String(suggestion.rank);
        item.dataset.word = suggestion.word;
        const key = document.createElement("kbd");
        key.textContent = String(suggestion.rank);
        const word = document.createElement("span");
        word.className = "suggestion-word";
        word.textContent = suggestion.word;
        const dist = document.createElement("span");
        dist.className = "suggestion-dist";
        dist.textContent = `d=${suggestion.distance}`;
        item.append(key, word, dist);
        return item;
      }),
    );
    if (detail.suggestions.length === 0) {
      const empty = document.createElement("li");
      empty.className = "empty";
      empty.textContent = "no dictionary word within reach";
      suggestionList.append(empty);
    }
    renderMembers(detail);
  }

  function renderCompletion(snap: SessionSnapshot): void {
    detailPane.hidden = true;
    delete detailPane.dataset.clusterId;
    completionPane.hidden = false;
    completionLineEl.textContent = completionLine(snap) ?? "";
    finalCostEl.textContent = costLine(snap.cost);
    finalCostEl.dataset.seconds = String(snap.cost.absolute_seconds);
    finalRelativeEl.textContent = relativeLine(snap.cost);
    exportLink.href = api.exportUrl();
  }

  function clearInlineError(): void {
    inlineError.hidden = true;
    inlineError.textContent = "";
  }

  function showInlineError(detail: string): void {
    inlineError.hidden = false;
    inlineError.textContent = detail;
  }

  async function open(clusterId: number): Promise<void> {
    clearInlineError();
    try {
      active = await api.cluster(clusterId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        await refresh();
        return;
      }
      throw err;
    }
    renderDetail(active);
    renderQueue();
  }

  async function refresh(): Promise<void> {
    snapshot = await api.session();
    queue = orderQueue(await api.clusters());
    renderSession(snapshot);
    const next = nextPending(queue);
    if (next === null) {
      active = null;
      renderQueue();
      renderCompletion(snapshot);
      return;
    }
    await open(next.id);
  }

  function act(body: ActionBody): void {
    const cluster = active;
    if (cluster === null) {
      return;
    }
    run(async () => {
      clearInlineError();
      let outcome: ActionOutcome;
      try {
        outcome = await api.clusterAction(cluster.id, body);
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          showInlineError(err.detail);
          return;
        }
        if (err instanceof ApiError && (err.status === 409 || err.status === 404)) {
          // Resolved elsewhere or gone stale: re-read the queue and move on.
          await refresh();
          return;
        }
        throw err;
      }
      renderCost(outcome.cost);
      if (body.kind === "type") {
        typeInput.value = "";
        typeInput.blur();
      }
      await refresh();
    });
  }

  const unbindKeys = bindKeys({
    typeBox: typeInput,
    verify: () => {
      if (active !== null) {
        act({ kind: "verify", label: active.modal_prediction });
      }
    },
    select: (rank) => {
      if (active === null) {
        return;
      }
      const offered = active.suggestions.find((s) => s.rank === rank);
      act({ kind: "select", label: offered?.word ?? "", suggestion_rank: rank });
    },
    focusType: () => {
      if (active !== null) {
        typeInput.focus();
      }
    },
    submitType: () => {
      act({ kind: "type", label: typeInput.value });
    },
  });

  retryBtn.addEventListener("click", () => {
    retryBanner.hidden = true;
    const work = retryWork;
    retryWork = null;
    if (work !== null) {
      run(work);
    }
  });

  run(refresh);

  return {
    whenIdle,
    destroy: () => unbindKeys(),
  };
}
