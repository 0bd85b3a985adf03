"""Classify-and-explain service and the client used to audit it.

The service always answers with the real model's decision. What the mode
changes is the explanation: honest mode explains the model that decided,
pr_attack mode explains a per-query stand-in that never touches a protected
feature. Nothing on the wire or in /v1/health discloses the mode.
"""

import itertools
import json
import os
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from math import ceil

import requests
import yaml

from .audit import QueryRecord
from .errors import ConformanceError, DataFormatError, ProtocolError, RateLimitedError
from .explain import (HONEST, SURROGATE, Explanation, explanation_from_doc,
                      explanation_to_doc, is_consequent)
from .mlp import MlpModel, load_mlp
from .predicates import OrientedPredicate, make_eq
from .space import FeatureSpace
from .tree import DecisionTree, load_tree, path_explanation, pr_attack_prune

MODE_HONEST = "honest"
MODE_PR_ATTACK = "pr_attack"
MODES = (MODE_HONEST, MODE_PR_ATTACK)

LISTEN_ENV = "EXPLAUDIT_LISTEN"


class TreeBackend:
    def __init__(self, tree: DecisionTree):
        self.tree = tree
        self.space = tree.space

    def decide(self, x) -> int:
        return self.tree.predict(x)

    def explain_honest(self, x) -> Explanation:
        return path_explanation(self.tree, x)

    def explain_attack(self, x) -> Explanation:
        surrogate = pr_attack_prune(self.tree, x)
        return path_explanation(surrogate, x, provenance=SURROGATE)


class MlpBackend:
    """Dense model over an all-numeric space; instances feed the net in
    feature order. Honest explanations pin every feature to its queried value
    (the finest rule the model honours for this one input); attack
    explanations pin only the legitimate ones, which is the path explanation
    of the one-point stand-in."""

    def __init__(self, model: MlpModel, space: FeatureSpace):
        if len(space) != model.n_inputs:
            raise DataFormatError(
                f"model takes {model.n_inputs} inputs, space has {len(space)} features")
        for spec in space.features:
            if not hasattr(spec.domain, "lo"):
                raise DataFormatError(
                    f"feature {spec.name!r} is categorical; this backend needs numeric inputs")
        self.model = model
        self.space = space

    def decide(self, x) -> int:
        return self.model.decide(self.space.validate(x))

    def _pin(self, x, indices, decision, provenance) -> Explanation:
        preds = tuple(
            OrientedPredicate(
                predicate=make_eq(self.space, self.space.features[i].name, x[i]),
                branch=True)
            for i in indices)
        return Explanation(predicates=preds, label=decision, provenance=provenance)

    def explain_honest(self, x) -> Explanation:
        x = self.space.validate(x)
        return self._pin(x, range(len(self.space)), self.decide(x), HONEST)

    def explain_attack(self, x) -> Explanation:
        x = self.space.validate(x)
        return self._pin(x, self.space.legit_indices, self.decide(x), SURROGATE)


class ClassifyService:
    """Mode-switchable decision+explanation pipeline, usable in process or
    behind the HTTP front end. Decisions are mode-independent by construction:
    both paths call the same backend for the decision."""

    def __init__(self, backend, mode: str = MODE_HONEST):
        if mode not in MODES:
            raise DataFormatError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.backend = backend
        self.space = backend.space
        self.mode = mode
        self._query_ids = itertools.count(1)
        self._id_lock = threading.Lock()

    def next_query_id(self) -> int:
        with self._id_lock:
            return next(self._query_ids)

    def classify(self, x):
        x = self.space.validate(x)
        decision = self.backend.decide(x)
        if self.mode == MODE_PR_ATTACK:
            explanation = self.backend.explain_attack(x)
        else:
            explanation = self.backend.explain_honest(x)
        return decision, explanation


def handle_classify(req, service: ClassifyService, limiter=None) -> dict:
    """One request mapping in, one reply mapping out.

    The HTTP front end delegates here and in-process callers can use it
    directly. Raises DataFormatError on a malformed request (400 on the wire)
    and RateLimitedError when the limiter refuses (429 on the wire).
    """
    if not isinstance(req, dict):
        raise DataFormatError("request body must be an object")
    client_id = req.get("client_id")
    features = req.get("features")
    if not isinstance(client_id, str) or not client_id:
        raise DataFormatError("client_id must be a non-empty string")
    if not isinstance(features, dict):
        raise DataFormatError("features must be an object")
    if limiter is not None:
        allowed, retry_after = limiter.allow(client_id)
        if not allowed:
            raise RateLimitedError("rate limit exceeded", retry_after=retry_after)
    try:
        x = service.space.instance_from_mapping(features)
    except ConformanceError as exc:
        raise DataFormatError(str(exc))
    decision, explanation = service.classify(x)
    return {
        "decision": decision,
        "explanation": explanation_to_doc(explanation, service.space),
        "query_id": service.next_query_id(),
    }


class RateLimiter:
    """Sliding-window limiter: at most max_requests per client within any
    window_seconds span. allow() is atomic, so concurrent callers over one
    client_id can never exceed the budget."""

    def __init__(self, max_requests: int, window_seconds: float, clock=time.monotonic):
        if max_requests < 1:
            raise DataFormatError("max_requests must be >= 1")
        if window_seconds <= 0:
            raise DataFormatError("window_seconds must be positive")
        self.max_requests = max_requests
        self.window_seconds = window_seconds
        self._clock = clock
        self._lock = threading.Lock()
        self._hits = {}  # client_id -> deque of admission times

    def allow(self, client_id: str):
        """(True, 0.0) and the request is admitted, or (False, retry_after)."""
        now = self._clock()
        horizon = now - self.window_seconds
        with self._lock:
            hits = self._hits.setdefault(client_id, deque())
            while hits and hits[0] <= horizon:
                hits.popleft()
            if len(hits) >= self.max_requests:
                return False, hits[0] + self.window_seconds - now
            hits.append(now)
            return True, 0.0


# -- HTTP front end -----------------------------------------------------------

class ClassifyServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # survive bursts of concurrent clients

    def __init__(self, address, service: ClassifyService, limiter: RateLimiter):
        super().__init__(address, _Handler)
        self.service = service
        self.limiter = limiter


class _Handler(BaseHTTPRequestHandler):
    server_version = "classify-service"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, status: int, payload, extra_headers=()):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for name, value in extra_headers:
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send_json(200, {"status": "ok"})
        else:
            self._send_json(404, {"error": f"no such endpoint {self.path}"})

    def do_POST(self):
        if self.path != "/v1/classify":
            self._send_json(404, {"error": f"no such endpoint {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length).decode())
        except (ValueError, TypeError) as exc:
            self._send_json(400, {"error": f"malformed request: {exc}"})
            return
        try:
            reply = handle_classify(doc, self.server.service, self.server.limiter)
        except RateLimitedError as exc:
            retry_after = max(1, ceil(exc.retry_after or 1.0))
            self._send_json(429, {"error": "rate limit exceeded"},
                            extra_headers=[("Retry-After", str(retry_after))])
            return
        except DataFormatError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, reply)


def make_server(service: ClassifyService, limiter: RateLimiter,
                host: str = "127.0.0.1", port: int = 0) -> ClassifyServer:
    """Bound but not yet serving; port 0 picks a free port (server_address[1])."""
    return ClassifyServer((host, port), service, limiter)


# -- client -------------------------------------------------------------------

class RemoteOracle:
    """Queries the HTTP service and keeps a transcript for auditing.

    Calling it returns the bare decision, so it plugs into the probing
    scenarios directly. 429 responses are honoured by sleeping Retry-After
    and retrying. A reply whose explanation label disagrees with its decision
    is itself hard evidence of tampering, so it raises ProtocolError rather
    than being recorded.
    """

    def __init__(self, base_url: str, client_id: str, space: FeatureSpace,
                 session=None, max_retries: int = 60, max_sleep: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.client_id = client_id
        self.space = space
        self.session = session or requests.Session()
        self.max_retries = max_retries
        self.max_sleep = max_sleep
        self.transcript = []

    def classify(self, x) -> QueryRecord:
        x = self.space.validate(x)
        payload = {
            "client_id": self.client_id,
            "features": {spec.name: value for spec, value in zip(self.space.features, x)},
        }
        url = f"{self.base_url}/v1/classify"
        for _ in range(self.max_retries + 1):
            resp = self.session.post(url, json=payload)
            if resp.status_code == 429:
                try:
                    delay = float(resp.headers.get("Retry-After", "1"))
                except ValueError:
                    delay = 1.0
                time.sleep(min(max(delay, 0.05), self.max_sleep))
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                doc = resp.json()
                decision = int(doc["decision"])
                explanation = explanation_from_doc(doc["explanation"], self.space)
            except (ValueError, KeyError, TypeError) as exc:
                raise ProtocolError(f"bad response body: {exc}")
            if not is_consequent(explanation, decision):
                raise ProtocolError(
                    f"non-consequent reply: explanation label {explanation.label} "
                    f"vs decision {decision}")
            record = QueryRecord(x=x, decision=decision, explanation=explanation,
                                 timestamp=len(self.transcript))
            self.transcript.append(record)
            return record
        raise RateLimitedError(f"gave up after {self.max_retries} rate-limited retries")

    def __call__(self, x) -> int:
        return self.classify(x).decision

    def health(self) -> dict:
        resp = self.session.get(f"{self.base_url}/v1/health")
        if resp.status_code != 200:
            raise ProtocolError(f"health check failed: HTTP {resp.status_code}")
        return resp.json()


def remote_oracle(config) -> RemoteOracle:
    """Client config mapping to a ready oracle.

    Keys: url (required), client_id (default "auditor"), space (required:
    a FeatureSpace or a path to one), max_retries, max_sleep.
    """
    if not isinstance(config, dict) or "url" not in config or "space" not in config:
        raise DataFormatError("client config needs 'url' and 'space'")
    space = config["space"]
    if not isinstance(space, FeatureSpace):
        space = FeatureSpace.load(space)
    kwargs = {}
    for key in ("max_retries", "max_sleep"):
        if key in config:
            kwargs[key] = config[key]
    return RemoteOracle(config["url"], config.get("client_id", "auditor"),
                        space, **kwargs)


# -- configuration ------------------------------------------------------------

def parse_listen(text: str):
    """'host:port' -> (host, port)."""
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise DataFormatError(f"listen address must be host:port, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise DataFormatError(f"bad port in listen address {text!r}")


def service_from_config_doc(doc) -> ClassifyService:
    """Backend + mode from a config mapping:

    backend:
      kind: tree | mlp
      tree: path.yaml          (kind tree)
      model: path.yaml         (kind mlp)
      space: path.yaml         (kind mlp)
    mode: honest | pr_attack
    """
    if not isinstance(doc, dict) or "backend" not in doc:
        raise DataFormatError("service config needs a 'backend' mapping")
    backend_doc = doc["backend"]
    kind = backend_doc.get("kind")
    if kind == "tree":
        backend = TreeBackend(load_tree(backend_doc["tree"]))
    elif kind == "mlp":
        model = load_mlp(backend_doc["model"])
        space = FeatureSpace.load(backend_doc["space"])
        backend = MlpBackend(model, space)
    else:
        raise DataFormatError(f"unknown backend kind {kind!r}")
    return ClassifyService(backend, mode=doc.get("mode", MODE_HONEST))


def load_service_config(path, mode_override: str | None = None):
    """Returns (service, limiter, host, port) ready for make_server.

    The EXPLAUDIT_LISTEN environment variable ('host:port') overrides the
    config file's listen address.
    """
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if mode_override is not None:
        if not isinstance(doc, dict):
            raise DataFormatError("service config must be a mapping")
        doc = {**doc, "mode": mode_override}
    service = service_from_config_doc(doc)
    rl = doc.get("rate_limit", {})
    limiter = RateLimiter(max_requests=int(rl.get("max_requests", 100)),
                          window_seconds=float(rl.get("window_seconds", 1.0)))
    listen = os.environ.get(LISTEN_ENV) or doc.get("listen", "127.0.0.1:8080")
    host, port = parse_listen(str(listen))
    return service, limiter, host, port
