"""Hierarchical link network over a 1D chain and its swap schedule.

Nodes are numbered ``0 .. N-1``.  Level-0 links join neighbours; a level-l
link joins ``j * 2**l`` and ``(j + 1) * 2**l`` and is produced by swapping
the two level-(l-1) links that meet at its midpoint.  Links that would run
past the right end of the chain are simply not built.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .errors import DomainError


class Link(NamedTuple):
    level: int
    u: int
    v: int


def _check_link(link: Link, n_nodes: int) -> None:
    level, u, v = link
    if level < 0 or not (0 <= u < v < n_nodes):
        raise DomainError(f"bad link {tuple(link)} for {n_nodes} nodes")
    if level == 0:
        if v != u + 1:
            raise DomainError(f"level-0 link must join neighbours, got {tuple(link)}")
    elif v - u != 2**level or u % 2**level:
        raise DomainError(f"level-{level} link must span an aligned 2**{level} block, got {tuple(link)}")


def _canonical_links(n_nodes: int, k_pairs: int) -> tuple[Link, ...]:
    links = [Link(0, i, i + 1) for i in range(n_nodes - 1)]
    for level in range(1, k_pairs):
        step = 2**level
        links.extend(Link(level, j * step, (j + 1) * step) for j in range((n_nodes - 1) // step))
    return tuple(links)


@dataclass(frozen=True)
class HierNet:
    n_nodes: int
    max_level: int
    links: tuple[Link, ...]

    def __post_init__(self):
        if self.n_nodes < 2:
            raise DomainError(f"a chain needs at least 2 nodes, got {self.n_nodes}")
        if self.max_level < 0:
            raise DomainError(f"max_level must be >= 0, got {self.max_level}")
        for link in self.links:
            _check_link(link, self.n_nodes)
        if len(set(self.links)) != len(self.links):
            raise DomainError("duplicate links")
        if tuple(sorted(self.links)) != _canonical_links(self.n_nodes, self.max_level + 1):
            raise DomainError(
                f"links do not form the hierarchical network on {self.n_nodes} nodes "
                f"with {self.max_level} levels"
            )

    @property
    def k_pairs(self) -> int:
        return self.max_level + 1

    def level_counts(self) -> list[int]:
        counts = [0] * (self.max_level + 1)
        for link in self.links:
            counts[link.level] += 1
        return counts


def build_hiernet(n_nodes: int, k_pairs: int) -> HierNet:
    if n_nodes < 2:
        raise DomainError(f"a chain needs at least 2 nodes, got {n_nodes}")
    if k_pairs < 1:
        raise DomainError(f"need at least one pair per edge, got {k_pairs}")
    return HierNet(n_nodes, k_pairs - 1, _canonical_links(n_nodes, k_pairs))


@dataclass(frozen=True)
class SwapStep:
    level: int
    midpoint: int
    left: Link
    right: Link
    result: Link


def swap_schedule(net: HierNet) -> list[SwapStep]:
    """Swaps that build every non-local link, lower levels first."""
    steps = []
    for link in sorted(net.links):
        if link.level == 0:
            continue
        mid = (link.u + link.v) // 2
        steps.append(SwapStep(
            link.level, mid,
            Link(link.level - 1, link.u, mid),
            Link(link.level - 1, mid, link.v),
            link,
        ))
    return steps


def replay_schedule(n_nodes: int, steps: list[SwapStep]) -> set[Link]:
    """Rebuild the link set from the bare chain by running ``steps`` in order."""
    have = {Link(0, i, i + 1) for i in range(n_nodes - 1)}
    for st in steps:
        if st.left not in have or st.right not in have:
            raise DomainError(f"swap at node {st.midpoint} uses a link not yet built")
        if st.left.v != st.midpoint or st.right.u != st.midpoint:
            raise DomainError(f"swap at node {st.midpoint} does not meet at its midpoint")
        have.add(Link(st.level, st.left.u, st.right.v))
    return have


def required_pairs_for_full_hierarchy(n_nodes: int) -> int:
    """Pairs per edge needed for one link to join the two border nodes.

    Only defined for chains of ``2**m + 1`` nodes.
    """
    span = n_nodes - 1
    if span < 1 or span & (span - 1):
        raise DomainError(
            f"{n_nodes} nodes is not 2**m + 1; build_hiernet with an explicit "
            "pair count truncates the hierarchy at the right border instead"
        )
    return 1 + span.bit_length() - 1


@dataclass(frozen=True)
class ResourceReport:
    n_nodes: int
    pairs_per_edge: int
    total_base_pairs: int
    paper_estimate: float

    @property
    def n_squared(self) -> int:
        return self.n_nodes**2


def resource_report(n_nodes: int, k_pairs: int) -> ResourceReport:
    """Exact base-pair count ``(N-1) K`` next to the ``N (1 + log2(N-1))`` scaling estimate."""
    if n_nodes < 2 or k_pairs < 1:
        raise DomainError(f"need n_nodes >= 2 and k_pairs >= 1, got {n_nodes}, {k_pairs}")
    return ResourceReport(
        n_nodes, k_pairs, (n_nodes - 1) * k_pairs, n_nodes * (1 + math.log2(n_nodes - 1))
    )


def dumps(net: HierNet) -> str:
    out = io.StringIO()
    out.write(f"hiernet {net.n_nodes} {net.k_pairs}\n")
    for link in sorted(net.links):
        out.write(f"{link.level} {link.u} {link.v}\n")
    return out.getvalue()


def loads(text: str) -> HierNet:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 3 or lines[0][0] != "hiernet":
        raise DomainError("missing 'hiernet N K' header")
    try:
        n_nodes, k_pairs = int(lines[0][1]), int(lines[0][2])
        links = [Link(*map(int, ln)) for ln in lines[1:]]
    except (TypeError, ValueError) as exc:
        raise DomainError(f"malformed hiernet file: {exc}") from None
    if k_pairs < 1:
        raise DomainError(f"need at least one pair per edge, got {k_pairs}")
    return HierNet(n_nodes, k_pairs - 1, tuple(sorted(links)))


def load(path: str | Path) -> HierNet:
    return loads(Path(path).read_text())


def dump(net: HierNet, path: str | Path) -> None:
    Path(path).write_text(dumps(net))
