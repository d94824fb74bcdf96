// Global keyboard wiring. The whole review loop is reachable without a
// pointer: Enter verifies the shown word, digits 1-5 pick a suggestion by
// rank, T jumps to the type box; inside the type box Enter submits and
// Escape backs out.

export interface KeyTargets {
  typeBox: HTMLInputElement;
  verify: () => void;
  select: (rank: number) => void;
  focusType: () => void;
  submitType: () => void;
}

export function bindKeys(targets: KeyTargets): () => void {
  const handler = (event: KeyboardEvent) => {
    if (event.ctrlKey || event.metaKey || event.altKey) {
      return;
    }
    if (event.target === targets.typeBox) {
      if (event.key === "Enter") {
        event.preventDefault();
        targets.submitType();
      } else if (event.key === "Escape") {
        event.preventDefault();
        targets.typeBox.blur();
      }
      return;
    }
    if (event.key === "Enter") {
      event.preventDefault();
      targets.verify();
      return;
    }
    if (event.key >= "1" && event.key <= "5") {
      event.preventDefault();
      targets.select(Number(event.key));
      return;
    }
    if (event.key === "t" || event.key === "T") {
      event.preventDefault();
      targets.focusType();
    }
  };
  window.addEventListener("keydown", handler);
  return () => window.removeEventListener("keydown", handler);
}
