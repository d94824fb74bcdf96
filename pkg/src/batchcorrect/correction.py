"""Cluster-level correction: automatic propagation, simulated editing, and
the interactive session state machine behind the review service.

A correction touches whole clusters: one action can relabel every member.
The automatic mode propagates the most frequent prediction. The simulated
("oracle") mode replays what a perfect human editor would do: one action
fixes the cluster to its majority truth, then each deviant member gets an
individual repair. Every human action is logged with its kind — verify,
select, or type — because the three are priced differently.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from batchcorrect.clustering import Clustering
from batchcorrect.corpus import Corpus, write_corpus
from batchcorrect.lexicon import DEFAULT_MAX_DISTANCE, DEFAULT_TOP_K, Dictionary

KINDS = ("verify", "select", "type")
SOURCE_UNTOUCHED = "untouched"
SOURCE_PROPAGATED = "propagated"
SOURCE_HUMAN_TYPED = "human_typed"
SOURCE_HUMAN_SELECTED = "human_selected"
SOURCE_HUMAN_VERIFIED = "human_verified"

_KIND_TO_SOURCE = {
    "verify": SOURCE_HUMAN_VERIFIED,
    "select": SOURCE_HUMAN_SELECTED,
    "type": SOURCE_HUMAN_TYPED,
}


class SessionError(Exception):
    """Base for interactive-session failures."""


class UnknownTargetError(SessionError):
    """The referenced cluster or member does not exist."""


class AlreadyResolvedError(SessionError):
    """The referenced cluster or member already has its final label."""


class InvalidActionError(SessionError):
    """The action is malformed for its target (bad kind, label, or rank)."""


@dataclass(frozen=True)
class Action:
    """One editor operation applied to a cluster or a single member."""

    kind: str
    scope: str
    target: int | str
    label: str
    suggestion_rank: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.scope not in ("cluster", "member"):
            raise ValueError(f"scope must be 'cluster' or 'member', got {self.scope!r}")
        if self.kind == "select":
            if self.suggestion_rank is None or self.suggestion_rank < 1:
                raise ValueError("select actions need suggestion_rank >= 1")
        elif self.suggestion_rank is not None:
            raise ValueError(f"{self.kind} actions carry no suggestion_rank")
        if self.kind != "verify" and not self.label:
            raise ValueError(f"{self.kind} actions need a non-empty label")


@dataclass
class ActionLog:
    """Ordered action record; the kind tallies are always live recounts."""

    actions: list[Action] = field(default_factory=list)

    def append(self, action: Action) -> None:
        self.actions.append(action)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    @property
    def v_t(self) -> int:
        return sum(1 for a in self.actions if a.kind == "type")

    @property
    def v_d(self) -> int:
        return sum(1 for a in self.actions if a.kind == "select")

    @property
    def v_v(self) -> int:
        return sum(1 for a in self.actions if a.kind == "verify")


def action_to_record(action: Action, tallies: tuple[int, int, int]) -> dict:
    return {
        "kind": action.kind,
        "scope": action.scope,
        "target": action.target,
        "label": action.label,
        "rank": action.suggestion_rank,
        "v_t": tallies[0],
        "v_d": tallies[1],
        "v_v": tallies[2],
    }


def write_action_log(log: ActionLog, path: str | Path) -> None:
    """Line-delimited records with running tallies after each action."""
    v_t = v_d = v_v = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for action in log:
            v_t += action.kind == "type"
            v_d += action.kind == "select"
            v_v += action.kind == "verify"
            fh.write(
                json.dumps(action_to_record(action, (v_t, v_d, v_v)), ensure_ascii=False)
                + "\n"
            )


def read_action_log(path: str | Path) -> ActionLog:
    log = ActionLog()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            log.append(
                Action(
                    kind=record["kind"],
                    scope=record["scope"],
                    target=record["target"],
                    label=record["label"],
                    suggestion_rank=record.get("rank"),
                )
            )
    return log


@dataclass(frozen=True)
class CorrectionResult:
    """Final label and provenance per corpus position, plus the action log."""

    labels: tuple[str, ...]
    sources: tuple[str, ...]
    log: ActionLog

    def __post_init__(self):
        if len(self.labels) != len(self.sources):
            raise ValueError("labels and sources must align")


def prediction_frequencies(corpus: Corpus) -> Counter:
    return Counter(inst.prediction for inst in corpus.instances)


def modal_prediction(
    members, corpus: Corpus, dictionary: Dictionary | None = None, frequencies: Counter | None = None
) -> str:
    """The cluster's most frequent prediction string.

    Ties prefer dictionary words, then corpus-wide commoner predictions,
    then the alphabetically first — all observable without ground truth.
    """
    counts = Counter(corpus.instances[idx].prediction for idx in members)
    frequencies = frequencies or Counter()
    return min(
        counts,
        key=lambda word: (
            -counts[word],
            -(dictionary is not None and word in dictionary),
            -frequencies[word],
            word,
        ),
    )


def majority_truth(members, corpus: Corpus) -> str:
    counts = Counter()
    for idx in members:
        truth = corpus.instances[idx].ground_truth
        if truth is None:
            raise ValueError(f"instance {corpus.instances[idx].id!r} has no ground truth")
        counts[truth] += 1
    return min(counts, key=lambda word: (-counts[word], word))


def _flagged_clusters(clustering: Clustering, corpus: Corpus, dictionary: Dictionary):
    """Cluster ids that contain at least one flagged member."""
    return [
        cid
        for cid, members in enumerate(clustering.clusters)
        if any(corpus.instances[idx].prediction not in dictionary for idx in members)
    ]


def processing_order(clustering: Clustering, cluster_ids) -> list[int]:
    """Largest clusters first, ties by cluster id."""
    return sorted(cluster_ids, key=lambda cid: (-len(clustering.clusters[cid]), cid))


def _rank_of(dictionary: Dictionary, query: str, target: str, max_distance: int, top_k: int):
    for suggestion in dictionary.suggest(query, max_distance, top_k):
        if suggestion.word == target:
            return suggestion.rank
    return None


def auto_correct(
    clustering: Clustering, corpus: Corpus, dictionary: Dictionary
) -> CorrectionResult:
    """Propagate each cluster's modal prediction to all its members.

    Clusters without a single flagged member are left alone. No human
    actions are logged; reviewing the propagated labels is a separate pass.
    """
    labels = [inst.prediction for inst in corpus.instances]
    sources = [SOURCE_UNTOUCHED] * len(corpus.instances)
    frequencies = prediction_frequencies(corpus)
    for cid in _flagged_clusters(clustering, corpus, dictionary):
        members = clustering.clusters[cid]
        representative = modal_prediction(members, corpus, dictionary, frequencies)
        for idx in members:
            labels[idx] = representative
            sources[idx] = SOURCE_PROPAGATED
    return CorrectionResult(labels=tuple(labels), sources=tuple(sources), log=ActionLog())


def verification_pass(
    result: CorrectionResult,
    corpus: Corpus,
    dictionary: Dictionary,
    clustering: Clustering | None = None,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    top_k: int = DEFAULT_TOP_K,
) -> ActionLog:
    """Simulate a human checking every propagated label against the image.

    Each propagated member costs one verification; when the label is wrong
    the fix costs a selection if the truth is among the prediction's
    suggestions, else a typed correction (which a growing dictionary
    learns). Clusters are visited largest first so typed words help later
    clusters; positions without a cluster are visited in corpus order.
    """
    touched = [i for i, src in enumerate(result.sources) if src == SOURCE_PROPAGATED]
    if clustering is not None:
        ordered: list[int] = []
        in_cluster: set[int] = set()
        for cid in processing_order(clustering, range(len(clustering.clusters))):
            for idx in clustering.clusters[cid]:
                if result.sources[idx] == SOURCE_PROPAGATED:
                    ordered.append(idx)
                    in_cluster.add(idx)
        ordered.extend(i for i in touched if i not in in_cluster)
        touched = ordered
    log = ActionLog()
    for idx in touched:
        inst = corpus.instances[idx]
        if inst.ground_truth is None:
            raise ValueError(f"instance {inst.id!r} has no ground truth")
        log.append(Action(kind="verify", scope="member", target=inst.id, label=result.labels[idx]))
        if result.labels[idx] != inst.ground_truth:
            rank = _rank_of(dictionary, inst.prediction, inst.ground_truth, max_distance, top_k)
            if rank is not None:
                log.append(
                    Action(
                        kind="select",
                        scope="member",
                        target=inst.id,
                        label=inst.ground_truth,
                        suggestion_rank=rank,
                    )
                )
            else:
                log.append(
                    Action(kind="type", scope="member", target=inst.id, label=inst.ground_truth)
                )
                if dictionary.mode == "growing":
                    dictionary.add_word(inst.ground_truth)
    return log


def oracle_correct(
    clustering: Clustering,
    corpus: Corpus,
    dictionary: Dictionary,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    top_k: int = DEFAULT_TOP_K,
    per_member_verify: bool = False,
) -> CorrectionResult:
    """Simulate a perfect editor fixing each flagged cluster to its truth.

    Largest clusters first. The cluster-level action places the majority
    truth L on every member: a verification when the modal prediction
    already equals L, a selection when L appears among the modal
    prediction's suggestions, otherwise one typed entry. Members whose own
    truth differs from L then get individual repairs. A growing dictionary
    learns every typed word as it goes. With per_member_verify=True an
    extra verification is charged for every member looked at (default off:
    the single cluster action covers the look).
    """
    labels = [inst.prediction for inst in corpus.instances]
    sources = [SOURCE_UNTOUCHED] * len(corpus.instances)
    frequencies = prediction_frequencies(corpus)
    log = ActionLog()
    for cid in processing_order(clustering, _flagged_clusters(clustering, corpus, dictionary)):
        members = clustering.clusters[cid]
        truth = majority_truth(members, corpus)
        modal = modal_prediction(members, corpus, dictionary, frequencies)
        if per_member_verify:
            for idx in members:
                log.append(
                    Action(
                        kind="verify",
                        scope="member",
                        target=corpus.instances[idx].id,
                        label=corpus.instances[idx].prediction,
                    )
                )
        if modal == truth:
            base = Action(kind="verify", scope="cluster", target=cid, label=truth)
        else:
            rank = _rank_of(dictionary, modal, truth, max_distance, top_k)
            if rank is not None:
                base = Action(
                    kind="select", scope="cluster", target=cid, label=truth, suggestion_rank=rank
                )
            else:
                base = Action(kind="type", scope="cluster", target=cid, label=truth)
        log.append(base)
        if base.kind == "type" and dictionary.mode == "growing":
            dictionary.add_word(truth)
        base_source = _KIND_TO_SOURCE[base.kind]
        for idx in members:
            inst = corpus.instances[idx]
            if inst.ground_truth == truth:
                labels[idx] = truth
                sources[idx] = base_source
                continue
            rank = _rank_of(dictionary, inst.prediction, inst.ground_truth, max_distance, top_k)
            if rank is not None:
                member_action = Action(
                    kind="select",
                    scope="member",
                    target=inst.id,
                    label=inst.ground_truth,
                    suggestion_rank=rank,
                )
            else:
                member_action = Action(
                    kind="type", scope="member", target=inst.id, label=inst.ground_truth
                )
                if dictionary.mode == "growing":
                    dictionary.add_word(inst.ground_truth)
            log.append(member_action)
            labels[idx] = inst.ground_truth
            sources[idx] = _KIND_TO_SOURCE[member_action.kind]
    return CorrectionResult(labels=tuple(labels), sources=tuple(sources), log=log)


def accuracy(result: CorrectionResult, corpus: Corpus, positions=None) -> float:
    """Fraction of evaluated positions whose final label equals the truth."""
    if positions is None:
        positions = range(len(corpus.instances))
    positions = list(positions)
    if not positions:
        raise ValueError("empty evaluation set")
    hits = 0
    for idx in positions:
        inst = corpus.instances[idx]
        if inst.ground_truth is None:
            raise ValueError(f"instance {inst.id!r} has no ground truth")
        hits += result.labels[idx] == inst.ground_truth
    return hits / len(positions)


def result_corpus(result: CorrectionResult, corpus: Corpus) -> Corpus:
    """The corpus with predictions replaced by final labels."""
    instances = [
        replace(inst, prediction=result.labels[pos])
        for pos, inst in enumerate(corpus.instances)
    ]
    return Corpus(instances=instances, embeddings=corpus.embeddings, metadata=corpus.metadata)


def write_result(result: CorrectionResult, corpus: Corpus, path: str | Path) -> None:
    """Corrected corpus file; each record gains a source column."""
    corrected = result_corpus(result, corpus)
    write_corpus(
        corrected,
        path,
        extra_fields={pos: {"source": src} for pos, src in enumerate(result.sources)},
    )


class SessionState:
    """Mutable review session over one clustering.

    Cluster actions resolve whole clusters; member actions override single
    members while their cluster is still pending. All validation errors
    surface as SessionError subclasses so the service can map them to
    status codes.
    """

    def __init__(
        self,
        corpus: Corpus,
        clustering: Clustering,
        dictionary: Dictionary,
        max_distance: int = DEFAULT_MAX_DISTANCE,
        top_k: int = DEFAULT_TOP_K,
    ):
        self.corpus = corpus
        self.clustering = clustering
        self.dictionary = dictionary
        self.max_distance = max_distance
        self.top_k = top_k
        self.log = ActionLog()
        self.labels: dict[int, str] = {}
        self.sources: dict[int, str] = {}
        self.overridden: set[int] = set()
        self.resolved: set[int] = set()
        self.frequencies = prediction_frequencies(corpus)
        self._member_cluster: dict[str, tuple[int, int]] = {}
        for cid, members in enumerate(clustering.clusters):
            for idx in members:
                self._member_cluster[corpus.instances[idx].id] = (cid, idx)

    # -- queries ---------------------------------------------------------

    def cluster_ids(self) -> range:
        return range(len(self.clustering.clusters))

    def is_resolved(self, cid: int) -> bool:
        return cid in self.resolved

    def modal(self, cid: int) -> str:
        self._check_cluster(cid)
        return modal_prediction(
            self.clustering.clusters[cid], self.corpus, self.dictionary, self.frequencies
        )

    def offered(self, cid: int):
        """Suggestions for the cluster's modal prediction, current dictionary."""
        return self.dictionary.suggest(self.modal(cid), self.max_distance, self.top_k)

    def member_offered(self, instance_id: str):
        _cid, idx = self._lookup_member(instance_id)
        return self.dictionary.suggest(
            self.corpus.instances[idx].prediction, self.max_distance, self.top_k
        )

    def cluster_of(self, instance_id: str) -> int:
        cid, _idx = self._lookup_member(instance_id)
        return cid

    def _check_cluster(self, cid) -> None:
        if not isinstance(cid, int) or not 0 <= cid < len(self.clustering.clusters):
            raise UnknownTargetError(f"no cluster {cid!r}")

    def _lookup_member(self, instance_id) -> tuple[int, int]:
        try:
            return self._member_cluster[instance_id]
        except KeyError:
            raise UnknownTargetError(f"no clustered member {instance_id!r}") from None

    # -- mutation --------------------------------------------------------

    def apply(self, action: Action) -> None:
        if action.scope == "cluster":
            self._apply_cluster(action)
        else:
            self._apply_member(action)

    def _validated_label(self, action: Action, shown: str, offered) -> str:
        if action.kind == "verify":
            if action.label != shown:
                raise InvalidActionError(
                    f"verify must confirm the shown label {shown!r}, got {action.label!r}"
                )
            return shown
        if action.kind == "select":
            if not 1 <= action.suggestion_rank <= len(offered):
                raise InvalidActionError(
                    f"suggestion_rank {action.suggestion_rank} out of range "
                    f"(1..{len(offered)})"
                )
            expected = offered[action.suggestion_rank - 1].word
            if action.label != expected:
                raise InvalidActionError(
                    f"rank {action.suggestion_rank} offers {expected!r}, got {action.label!r}"
                )
            return expected
        return action.label

    def _apply_cluster(self, action: Action) -> None:
        cid = action.target
        self._check_cluster(cid)
        if cid in self.resolved:
            raise AlreadyResolvedError(f"cluster {cid} is already resolved")
        label = self._validated_label(action, self.modal(cid), self.offered(cid))
        if action.kind == "type" and self.dictionary.mode == "growing":
            self.dictionary.add_word(label)
        source = _KIND_TO_SOURCE[action.kind]
        for idx in self.clustering.clusters[cid]:
            if idx in self.overridden:
                continue
            self.labels[idx] = label
            self.sources[idx] = source
        self.resolved.add(cid)
        self.log.append(action)

    def _apply_member(self, action: Action) -> None:
        cid, idx = self._lookup_member(action.target)
        if cid in self.resolved:
            raise AlreadyResolvedError(
                f"cluster {cid} of member {action.target!r} is already resolved"
            )
        if idx in self.overridden:
            raise AlreadyResolvedError(f"member {action.target!r} is already overridden")
        inst = self.corpus.instances[idx]
        label = self._validated_label(action, inst.prediction, self.member_offered(action.target))
        if action.kind == "type" and self.dictionary.mode == "growing":
            self.dictionary.add_word(label)
        self.labels[idx] = label
        self.sources[idx] = _KIND_TO_SOURCE[action.kind]
        self.overridden.add(idx)
        self.log.append(action)
        if all(i in self.labels for i in self.clustering.clusters[cid]):
            self.resolved.add(cid)

    # -- export ----------------------------------------------------------

    def result(self) -> CorrectionResult:
        """Current state as a correction result; pending members untouched."""
        labels = [inst.prediction for inst in self.corpus.instances]
        sources = [SOURCE_UNTOUCHED] * len(self.corpus.instances)
        for idx, label in self.labels.items():
            labels[idx] = label
            sources[idx] = self.sources[idx]
        return CorrectionResult(labels=tuple(labels), sources=tuple(sources), log=self.log)

    def replay(self, log: ActionLog) -> None:
        """Re-apply a previously accepted action sequence."""
        for action in log:
            self.apply(action)
