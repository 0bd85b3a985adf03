"""User-side auditing: incoherent-pair search over query transcripts, active
probing scenarios against a decision oracle, and the query-budget arithmetic
for detection confidence.

An incoherent pair is two queries that agree on every legitimate feature yet
received different decisions. One such pair is a proof that the oracle's
decisions depend on the discriminative features; no single query can be.
"""

import math
import random
from dataclasses import dataclass

from .errors import DataFormatError, DegenerateRateError
from .explain import Explanation, is_apropos, is_consequent, mentions_discriminative
from .space import FeatureSpace, Instance


@dataclass(frozen=True)
class QueryRecord:
    x: Instance
    decision: int
    explanation: Explanation | None = None
    timestamp: int = 0


@dataclass(frozen=True)
class IncoherentPair:
    first: QueryRecord
    second: QueryRecord


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one probing run: which feature set was probed, how many
    pairs were tested, and the witnesses found."""

    features: str
    queries_issued: int
    pairs_tested: int
    ips: tuple  # IncoherentPair witnesses

    @property
    def ips_found(self) -> int:
        return len(self.ips)

    @property
    def ip_rate(self) -> float:
        if self.pairs_tested == 0:
            return 0.0
        return self.ips_found / self.pairs_tested

    @property
    def confidence(self) -> float:
        """Chance a run of this size would surface at least one pair, taking
        the observed rate at face value."""
        return confidence(self.ip_rate, self.pairs_tested)


# -- transcript checks ---------------------------------------------------------

def find_incoherent_pair(records, space: FeatureSpace) -> IncoherentPair | None:
    """First incoherent pair in transcript order, or None. Linear scan with
    legit-part grouping."""
    seen = {}  # legit part -> first record
    for rec in records:
        key = space.legit_part(rec.x)
        prior = seen.get(key)
        if prior is None:
            seen[key] = rec
        elif prior.decision != rec.decision:
            return IncoherentPair(first=prior, second=rec)
    return None


def is_coherent(records, space: FeatureSpace) -> bool:
    return find_incoherent_pair(records, space) is None


def check_coherence_log(records, space: FeatureSpace):
    """All incoherent pairs in a transcript, in transcript-pair order: the
    output equals a quadratic scan over (i, j), i < j, but runs by grouping
    records on their legit part."""
    records = list(records)
    pairs = []
    groups = {}  # legit part -> ([indices with decision 0], [indices with decision 1])
    for j, rec in enumerate(records):
        key = space.legit_part(rec.x)
        zeros, ones = groups.setdefault(key, ([], []))
        opposite = ones if rec.decision == 0 else zeros
        for i in opposite:
            pairs.append((i, j))
        (zeros if rec.decision == 0 else ones).append(j)
    pairs.sort()
    return [IncoherentPair(first=records[i], second=records[j]) for i, j in pairs]


def audit_transcript(records, space: FeatureSpace):
    """Run every per-query check plus the cross-query coherence check.

    Records lacking an explanation still participate in coherence grouping
    but contribute nothing to the per-query counters.
    """
    records = list(records)
    apropos_failures = 0
    consequent_failures = 0
    discriminative_mentions = 0
    for rec in records:
        if rec.explanation is None:
            continue
        if not is_apropos(rec.explanation, rec.x, space):
            apropos_failures += 1
        if not is_consequent(rec.explanation, rec.decision):
            consequent_failures += 1
        if mentions_discriminative(rec.explanation, space):
            discriminative_mentions += 1
    return TranscriptAudit(
        n_records=len(records),
        apropos_failures=apropos_failures,
        consequent_failures=consequent_failures,
        discriminative_mentions=discriminative_mentions,
        incoherent_pair=find_incoherent_pair(records, space),
    )


@dataclass(frozen=True)
class TranscriptAudit:
    n_records: int
    apropos_failures: int
    consequent_failures: int
    discriminative_mentions: int
    incoherent_pair: IncoherentPair | None

    @property
    def coherent(self) -> bool:
        return self.incoherent_pair is None

    @property
    def individually_clean(self) -> bool:
        """True when every single query passed all per-query checks."""
        return (self.apropos_failures == 0
                and self.consequent_failures == 0
                and self.discriminative_mentions == 0)


# -- exhaustive search ---------------------------------------------------------

def find_ip_exhaustive(oracle, space: FeatureSpace) -> IncoherentPair | None:
    """Search the whole instance space for an incoherent pair.

    Returns a witness pair with equal legitimate parts and differing
    decisions, or None when the oracle is legitimate. Requires an enumerable
    space; cost is one query per instance in the worst case.
    """
    space.require_enumerable()
    t = 0
    for legit in space.legit_assignments():
        first = None
        for discr in space.discriminative_assignments():
            x = space.merge(legit, discr)
            rec = QueryRecord(x=x, decision=oracle(x), timestamp=t)
            t += 1
            if first is None:
                first = rec
            elif rec.decision != first.decision:
                return IncoherentPair(first=first, second=rec)
    return None


# -- active probing ------------------------------------------------------------

def scenario_a_probe(oracle, space: FeatureSpace, seeds, trials: int,
                     rng_seed: int) -> AuditReport:
    """Random probing: per trial, take a random seed profile, redraw one
    random discriminative feature uniformly from its domain, query both the
    original and the modified instance, and compare decisions.

    The redraw may repeat the original value; such trials count as tested
    pairs that cannot be incoherent. Each trial derives its own RNG stream
    from (rng_seed, trial), so results do not depend on query ordering.
    """
    seeds = [space.validate(p) for p in seeds]
    if not seeds:
        raise DataFormatError("no seed profiles to probe from")
    if trials < 1:
        raise DataFormatError("trials must be >= 1")
    discr = space.discriminative_indices
    if not discr:
        raise DataFormatError("space has no discriminative feature to probe")

    ips = []
    queries = 0
    for trial in range(trials):
        rng = random.Random(rng_seed * 1_000_003 + trial)
        x = seeds[rng.randrange(len(seeds))]
        idx = discr[rng.randrange(len(discr))]
        value = space.features[idx].domain.sample(rng)
        mutated = x[:idx] + (value,) + x[idx + 1:]
        base = QueryRecord(x=x, decision=oracle(x), timestamp=queries)
        probe = QueryRecord(x=mutated, decision=oracle(mutated), timestamp=queries + 1)
        queries += 2
        if base.decision != probe.decision:
            ips.append(IncoherentPair(first=base, second=probe))
    return AuditReport(features="random", queries_issued=queries,
                       pairs_tested=trials, ips=tuple(ips))


def scenario_b_swap(oracle, space: FeatureSpace, profiles, swap_set) -> AuditReport:
    """Crafted probing: for every ordered profile pair (p, q), p != q, copy
    q's values for the swap-set features into p and compare the crafted
    query's decision against p's.

    Deterministic; n profiles yield n*(n-1) tested pairs.
    """
    profiles = [space.validate(p) for p in profiles]
    if len(profiles) < 2:
        raise DataFormatError("need at least 2 profiles to swap between")
    swap_set = tuple(swap_set)
    if not swap_set:
        raise DataFormatError("empty swap set")
    for name in swap_set:
        if not space.is_discriminative(name):
            raise DataFormatError(
                f"swap feature {name!r} is not discriminative; a swap there "
                "changes the legitimate part and breaks the pair test")
    idxs = [space.index(name) for name in swap_set]

    queries = 0
    base = []
    for p in profiles:
        base.append(QueryRecord(x=p, decision=oracle(p), timestamp=queries))
        queries += 1
    ips = []
    tested = 0
    for i, x in enumerate(profiles):
        for j, donor in enumerate(profiles):
            if i == j:
                continue
            mutated = list(x)
            for idx in idxs:
                mutated[idx] = donor[idx]
            crafted = QueryRecord(x=tuple(mutated), decision=oracle(tuple(mutated)),
                                  timestamp=queries)
            queries += 1
            tested += 1
            if crafted.decision != base[i].decision:
                ips.append(IncoherentPair(first=base[i], second=crafted))
    return AuditReport(features="+".join(swap_set), queries_issued=queries,
                       pairs_tested=tested, ips=tuple(ips))


# -- detection confidence --------------------------------------------------------

def confidence(rate: float, n: int) -> float:
    """Probability that n independent pair tests, each an IP with this rate,
    surface at least one incoherent pair."""
    if not 0.0 <= rate <= 1.0:
        raise DegenerateRateError(f"rate must be in [0, 1], got {rate}")
    if n < 0:
        raise DegenerateRateError(f"pair count must be >= 0, got {n}")
    return 1.0 - (1.0 - rate) ** n

def queries_needed(rate: float, target: float) -> int:
    """Smallest n with confidence(rate, n) >= target."""
    if not 0.0 < target < 1.0:
        raise DegenerateRateError(f"confidence target must be in (0, 1), got {target}")
    if not 0.0 < rate < 1.0:
        raise DegenerateRateError(
            f"rate must be strictly between 0 and 1, got {rate}")
    n = math.ceil(math.log1p(-target) / math.log1p(-rate) - 1e-12)
    n = max(n, 1)
    # log1p keeps this exact in practice; nudge if rounding crossed the line
    if confidence(rate, n) < target:
        n += 1
    elif n > 1 and confidence(rate, n - 1) >= target:
        n -= 1
    return n
