import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import type {
  ActionBody,
  ActionOutcome,
  ClusterDetail,
  ClusterSummary,
  CostView,
  ReviewClient,
  SessionSnapshot,
  SuggestionView,
} from "../src/api.js";
import { startApp } from "../src/app.js";
import type { AppHandle } from "../src/app.js";

interface WorldCluster {
  id: number;
  size: number;
  modal: string;
  suggestions: SuggestionView[];
  members: ClusterDetail["members"];
  status: "pending" | "resolved";
  missing?: boolean;
}

/**
 * Stand-in service with canned state. Costs move by deliberately odd
 * amounts so any number on screen can only have come from a response,
 * never from client-side arithmetic.
 */
class FakeService implements ReviewClient {
  world = new Map<number, WorldCluster>();
  cost: CostView = {
    absolute_seconds: 4.75,
    v_t: 0,
    v_d: 0,
    v_v: 0,
    baseline_typing_seconds: 99.5,
    relative_to_typing: 0.25,
  };
  actions: Array<{ id: number; body: ActionBody }> = [];
  calls: string[] = [];
  failNextAction: Error | null = null;
  staleListingOnce = false;

  constructor(clusters: WorldCluster[]) {
    for (const cluster of clusters) {
      this.world.set(cluster.id, cluster);
    }
  }

  async session(): Promise<SessionSnapshot> {
    this.calls.push("session");
    const all = [...this.world.values()].filter((c) => !c.missing);
    const resolved = all.filter((c) => c.status === "resolved").length;
    return {
      clusters_total: all.length,
      clusters_pending: all.length - resolved,
      clusters_resolved: resolved,
      members: all.reduce((n, c) => n + c.size, 0),
      cost: { ...this.cost },
      dictionary_mode: "growing",
      dictionary_size: 21,
      method_tag: "mst",
    };
  }

  async clusters(): Promise<ClusterSummary[]> {
    this.calls.push("clusters");
    const stale = this.staleListingOnce;
    this.staleListingOnce = false;
    return [...this.world.values()]
      .filter((c) => stale || !c.missing)
      .map((c) => ({
        id: c.id,
        size: c.size,
        modal_prediction: c.modal,
        flagged_count: c.size,
        status: c.status,
      }));
  }

  async cluster(id: number): Promise<ClusterDetail> {
    this.calls.push(`cluster:${id}`);
    const found = this.world.get(id);
    if (!found || found.missing) {
      throw new ApiError(404, `no cluster ${id}`);
    }
    return {
      id: found.id,
      size: found.size,
      status: found.status,
      modal_prediction: found.modal,
      suggestions: found.suggestions,
      members: found.members,
    };
  }

  async clusterAction(id: number, body: ActionBody): Promise<ActionOutcome> {
    this.calls.push(`action:${id}:${body.kind}`);
    if (this.failNextAction) {
      const err = this.failNextAction;
      this.failNextAction = null;
      throw err;
    }
    const found = this.world.get(id);
    if (!found || found.missing) {
      throw new ApiError(404, `no cluster ${id}`);
    }
    if (found.status === "resolved") {
      throw new ApiError(409, `cluster ${id} is already resolved`);
    }
    this.actions.push({ id, body });
    found.status = "resolved";
    this.cost.absolute_seconds += 7.25;
    if (body.kind === "type") this.cost.v_t += 1;
    if (body.kind === "select") this.cost.v_d += 1;
    if (body.kind === "verify") this.cost.v_v += 1;
    return { cluster_id: id, resolved: true, cost: { ...this.cost } };
  }

  async memberAction(instanceId: string, body: ActionBody): Promise<ActionOutcome> {
    this.calls.push(`member:${instanceId}:${body.kind}`);
    throw new ApiError(404, `no member ${instanceId}`);
  }

  exportUrl(): string {
    return "/api/export";
  }
}

function member(id: string, prediction: string, label: string | null = null): ClusterDetail["members"][number] {
  return { id, prediction, image: null, label, source: label === null ? null : "human_selected" };
}

function makeWorld(): FakeService {
  return new FakeService([
    {
      id: 0,
      size: 2,
      modal: "gardon",
      suggestions: [
        { word: "garden", distance: 1, rank: 1 },
        { word: "grotto", distance: 2, rank: 2 },
      ],
      members: [member("w-0003", "gardon"), member("w-0004", "gardon")],
      status: "pending",
    },
    {
      id: 1,
      size: 5,
      modal: "harbur",
      suggestions: [{ word: "harbor", distance: 1, rank: 1 }],
      members: [
        member("w-0005", "harbur"),
        member("w-0006", "harbur"),
        member("w-0007", "harbur"),
        member("w-0008", "harbur"),
        member("w-0009", "harbur"),
      ],
      status: "pending",
    },
    {
      id: 2,
      size: 1,
      modal: "zephr",
      suggestions: [],
      members: [member("w-0010", "zephr", "zephyr")],
      status: "pending",
    },
  ]);
}

let root: HTMLElement;
let handle: AppHandle | null = null;

function q<T extends HTMLElement>(selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`missing ${selector}`);
  return el;
}

async function mount(api: ReviewClient): Promise<AppHandle> {
  handle = startApp(root, api);
  await handle.whenIdle();
  return handle;
}

function press(key: string, target: EventTarget = window): void {
  target.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }));
}

beforeEach(() => {
  root = document.createElement("div");
  document.body.append(root);
});

afterEach(() => {
  handle?.destroy();
  handle = null;
  root.remove();
});

describe("boot", () => {
  it("orders the queue largest-first and opens the top pending cluster", async () => {
    await mount(makeWorld());
    const rows = [...root.querySelectorAll("#queue-list li")];
    expect(rows.map((r) => (r as HTMLElement).dataset.id)).toEqual(["1", "0", "2"]);
    expect(q("#detail").dataset.clusterId).toBe("1");
    expect(q("#modal-word").textContent).toBe("harbur");
  });

  it("renders suggestions with their server ranks", async () => {
    await mount(makeWorld());
    press("Enter"); // resolve cluster 1, advance to cluster 0
    await handle!.whenIdle();
    const items = [...root.querySelectorAll("#suggestion-list li")];
    expect(items.map((i) => (i as HTMLElement).dataset.rank)).toEqual(["1", "2"]);
    expect(items.map((i) => (i as HTMLElement).dataset.word)).toEqual(["garden", "grotto"]);
  });

  it("shows members with the prediction prominent and a thumbnail slot", async () => {
    await mount(makeWorld());
    const cards = [...root.querySelectorAll("#member-grid .member")];
    expect(cards).toHaveLength(5);
    const first = cards[0] as HTMLElement;
    expect(first.querySelector(".member-word")?.textContent).toBe("harbur");
    expect(first.querySelector(".member-thumb")).not.toBeNull();
  });

  it("shows exactly the cost the service reports", async () => {
    await mount(makeWorld());
    expect(q("#cost-absolute").dataset.seconds).toBe("4.75");
    expect(q("#cost-absolute").textContent).toBe("4.75 s · 0 typed / 0 selected / 0 verified");
    expect(q("#cost-relative").textContent).toBe("25.0% of typing everything");
  });
});

describe("actions", () => {
  it("Enter verifies the shown word and advances", async () => {
    const api = makeWorld();
    await mount(api);
    press("Enter");
    await handle!.whenIdle();
    expect(api.actions).toEqual([{ id: 1, body: { kind: "verify", label: "harbur" } }]);
    expect(q("#detail").dataset.clusterId).toBe("0");
    const resolvedRow = root.querySelector('#queue-list li[data-id="1"]');
    expect(resolvedRow?.classList.contains("resolved")).toBe(true);
  });

  it("a digit selects that rank with the served word as label", async () => {
    const api = makeWorld();
    await mount(api);
    press("Enter");
    await handle!.whenIdle();
    press("2");
    await handle!.whenIdle();
    expect(api.actions[1]).toEqual({
      id: 0,
      body: { kind: "select", label: "grotto", suggestion_rank: 2 },
    });
  });

  it("T focuses the box, Enter submits the typed label and clears it", async () => {
    const api = makeWorld();
    await mount(api);
    const box = q<HTMLInputElement>("#type-input");
    press("t");
    expect(document.activeElement).toBe(box);
    box.value = "zebra";
    box.dispatchEvent(new Event("input", { bubbles: true }));
    press("Enter", box);
    await handle!.whenIdle();
    expect(api.actions).toEqual([{ id: 1, body: { kind: "type", label: "zebra" } }]);
    expect(box.value).toBe("");
  });

  it("updates the meter from the action outcome, not local arithmetic", async () => {
    const api = makeWorld();
    await mount(api);
    press("Enter");
    await handle!.whenIdle();
    expect(q("#cost-absolute").dataset.seconds).toBe("12");
    expect(q("#cost-absolute").textContent).toBe("12 s · 0 typed / 0 selected / 1 verified");
  });
});

describe("error handling", () => {
  it("shows a 422 inline and stays on the cluster", async () => {
    const api = makeWorld();
    await mount(api);
    api.failNextAction = new ApiError(422, "suggestion_rank 5 out of range (1..1)");
    press("5");
    await handle!.whenIdle();
    expect(q("#inline-error").hidden).toBe(false);
    expect(q("#inline-error").textContent).toBe("suggestion_rank 5 out of range (1..1)");
    expect(q("#detail").dataset.clusterId).toBe("1");
    expect(q("#cost-absolute").dataset.seconds).toBe("4.75");
  });

  it("clears the inline message on the next successful action", async () => {
    const api = makeWorld();
    await mount(api);
    api.failNextAction = new ApiError(422, "label must not be empty");
    press("Enter");
    await handle!.whenIdle();
    expect(q("#inline-error").hidden).toBe(false);
    press("Enter");
    await handle!.whenIdle();
    expect(q("#inline-error").hidden).toBe(true);
  });

  it("treats a 409 as resolved elsewhere: refreshes and moves on", async () => {
    const api = makeWorld();
    await mount(api);
    api.world.get(1)!.status = "resolved"; // another reviewer got there first
    press("Enter");
    await handle!.whenIdle();
    expect(q("#detail").dataset.clusterId).toBe("0");
    const after409 = api.calls.slice(api.calls.indexOf("action:1:verify") + 1);
    expect(after409).toContain("session");
    expect(after409).toContain("clusters");
    expect(api.actions).toEqual([]); // nothing was recorded as ours
  });

  it("refreshes the queue when an action hits a stale cluster", async () => {
    const api = makeWorld();
    await mount(api);
    api.world.get(1)!.missing = true;
    press("Enter");
    await handle!.whenIdle();
    expect(q("#detail").dataset.clusterId).toBe("0");
  });

  it("refreshes the queue when opening a stale cluster 404s", async () => {
    const api = makeWorld();
    await mount(api);
    api.world.get(1)!.status = "resolved";
    api.world.get(0)!.missing = true; // detail for 0 is gone...
    api.staleListingOnce = true; // ...but one listing still advertises it
    press("Enter"); // 409 -> refresh -> open misses 0 -> refresh again
    await handle!.whenIdle();
    expect(q("#detail").dataset.clusterId).toBe("2");
  });

  it("offers a retry after a network failure, and the retry succeeds", async () => {
    const api = makeWorld();
    await mount(api);
    api.failNextAction = new TypeError("fetch failed");
    press("Enter");
    await handle!.whenIdle();
    const banner = q("#retry-banner");
    expect(banner.hidden).toBe(false);
    expect(q("#retry-message").textContent).toContain("fetch failed");
    q<HTMLButtonElement>("#retry-btn").click();
    await handle!.whenIdle();
    expect(banner.hidden).toBe(true);
    expect(api.actions).toEqual([{ id: 1, body: { kind: "verify", label: "harbur" } }]);
    expect(q("#detail").dataset.clusterId).toBe("0");
  });
});

describe("completion", () => {
  it("shows the completion screen with the final served cost", async () => {
    const api = makeWorld();
    await mount(api);
    press("Enter");
    await handle!.whenIdle();
    press("1");
    await handle!.whenIdle();
    const box = q<HTMLInputElement>("#type-input");
    press("t");
    box.value = "zephyr";
    press("Enter", box);
    await handle!.whenIdle();
    expect(q("#completion").hidden).toBe(false);
    expect(q("#detail").hidden).toBe(true);
    expect(q("#completion-line").textContent).toBe("All 3 clusters reviewed.");
    expect(q("#final-cost").dataset.seconds).toBe("26.5");
    expect(q("#final-cost").textContent).toBe("26.5 s · 1 typed / 1 selected / 1 verified");
    expect(q<HTMLAnchorElement>("#export-link").getAttribute("href")).toBe("/api/export");
  });
});

describe("queue interaction", () => {
  it("clicking a row opens that cluster and shows stored labels", async () => {
    await mount(makeWorld());
    const row = root.querySelector<HTMLElement>('#queue-list li[data-id="2"]');
    row!.click();
    await handle!.whenIdle();
    expect(q("#detail").dataset.clusterId).toBe("2");
    expect(q("#member-grid .member-meta").textContent).toBe("w-0010 → zephyr (human_selected)");
  });
});
