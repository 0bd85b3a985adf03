import contextlib
import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
import requests
import yaml

from explaudit.audit import check_coherence_log, find_incoherent_pair, scenario_b_swap
from explaudit.errors import (DataFormatError, ProtocolError, RateLimitedError)
from explaudit.explain import (is_apropos, is_consequent, mentions_discriminative,
                               passes_user_checks)
from explaudit.mlp import TrainSpec, save_mlp, train_mlp
from explaudit.reports import probe_summary_rows, write_probe_csv
from explaudit.service import (MODE_HONEST, MODE_PR_ATTACK, ClassifyService,
                               MlpBackend, RateLimiter, RemoteOracle, TreeBackend,
                               handle_classify, load_service_config, make_server,
                               parse_listen, remote_oracle, service_from_config_doc)
from explaudit.space import (DISCRIMINATIVE, LEGIT, Categorical, FeatureSpace,
                             FeatureSpec, IntRange)
from explaudit.tree import DecisionTree, save_tree

from randgen import random_instance


def tree_service(door_tree, mode=MODE_PR_ATTACK):
    return ClassifyService(TreeBackend(door_tree), mode=mode)


def request_for(space, x, client_id="alice"):
    return {"client_id": client_id,
            "features": {spec.name: v for spec, v in zip(space.features, x)}}


@contextlib.contextmanager
def serving(service, limiter=None):
    server = make_server(service, limiter or RateLimiter(100_000, 1.0))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()


# -- request handling ------------------------------------------------------------

def test_handle_classify_reply_shape(door_tree):
    service = tree_service(door_tree)
    reply = handle_classify(request_for(door_tree.space, ("yes", "pink", 49)), service)
    assert set(reply) == {"decision", "explanation", "query_id"}
    assert reply["decision"] == 1
    assert reply["query_id"] == 1
    assert reply["explanation"]["label"] == 1
    assert isinstance(reply["explanation"]["predicates"], list)


def test_handle_classify_query_ids_are_monotonic(door_tree):
    service = tree_service(door_tree)
    req = request_for(door_tree.space, ("no", "other", 30))
    ids = [handle_classify(req, service)["query_id"] for _ in range(5)]
    assert ids == [1, 2, 3, 4, 5]


def test_handle_classify_rejects_malformed_requests(door_tree):
    service = tree_service(door_tree)
    good = request_for(door_tree.space, ("yes", "pink", 49))
    with pytest.raises(DataFormatError):
        handle_classify("not an object", service)
    with pytest.raises(DataFormatError):
        handle_classify({**good, "client_id": ""}, service)
    with pytest.raises(DataFormatError):
        handle_classify({**good, "client_id": 7}, service)
    with pytest.raises(DataFormatError):
        handle_classify({"client_id": "alice"}, service)
    with pytest.raises(DataFormatError):
        handle_classify({**good, "features": ["yes", "pink", 49]}, service)
    bad_value = request_for(door_tree.space, ("yes", "pink", 49))
    bad_value["features"]["age"] = 300
    with pytest.raises(DataFormatError):
        handle_classify(bad_value, service)


def test_handle_classify_honours_limiter(door_tree):
    service = tree_service(door_tree)
    limiter = RateLimiter(2, 60.0)
    req = request_for(door_tree.space, ("yes", "pink", 49))
    handle_classify(req, service, limiter)
    handle_classify(req, service, limiter)
    with pytest.raises(RateLimitedError) as exc_info:
        handle_classify(req, service, limiter)
    assert exc_info.value.retry_after > 0
    # other clients have their own budget
    other = request_for(door_tree.space, ("yes", "pink", 49), client_id="bob")
    handle_classify(other, service, limiter)


def test_decisions_identical_across_modes(door_tree):
    honest = tree_service(door_tree, MODE_HONEST)
    attack = tree_service(door_tree, MODE_PR_ATTACK)
    rng = random.Random(3)
    for _ in range(200):
        x = random_instance(door_tree.space, rng)
        dh, ah = honest.classify(x)
        da, aa = attack.classify(x)
        assert dh == da == door_tree.predict(x)
        assert ah.label == dh and aa.label == da


def test_attack_explanations_pass_user_checks(door_tree):
    service = tree_service(door_tree, MODE_PR_ATTACK)
    rng = random.Random(5)
    for _ in range(200):
        x = random_instance(door_tree.space, rng)
        decision, a = service.classify(x)
        assert passes_user_checks(a, x, decision, door_tree.space)


def test_honest_explanations_can_mention_discriminative(door_tree):
    service = tree_service(door_tree, MODE_HONEST)
    _, a = service.classify(("yes", "pink", 49))
    assert mentions_discriminative(a, door_tree.space)


def test_unknown_mode_rejected(door_tree):
    with pytest.raises(DataFormatError):
        ClassifyService(TreeBackend(door_tree), mode="stealth")


# -- MLP backend -------------------------------------------------------------------

def numeric_space():
    return FeatureSpace([
        FeatureSpec("income", IntRange(0, 9), LEGIT),
        FeatureSpec("debts", IntRange(0, 9), LEGIT),
        FeatureSpec("age", IntRange(18, 99), DISCRIMINATIVE),
    ])


def numeric_model(space, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([
        rng.integers(0, 10, size=80),
        rng.integers(0, 10, size=80),
        rng.integers(18, 100, size=80),
    ])
    y = (X[:, 0] > X[:, 1]).astype(int)
    return train_mlp(X, y, TrainSpec(hidden=3, epochs=5, seed=seed)).model


def test_mlp_backend_explanations():
    space = numeric_space()
    backend = MlpBackend(numeric_model(space), space)
    x = (7, 2, 44)
    decision = backend.decide(x)

    honest = backend.explain_honest(x)
    assert len(honest.predicates) == 3
    assert honest.label == decision
    assert is_apropos(honest, x, space) and is_consequent(honest, decision)
    assert mentions_discriminative(honest, space)

    attack = backend.explain_attack(x)
    assert [p.predicate.feature for p in attack.predicates] == ["income", "debts"]
    assert attack.label == decision
    assert passes_user_checks(attack, x, decision, space)


def test_mlp_backend_service_modes_agree_on_decisions():
    space = numeric_space()
    backend = MlpBackend(numeric_model(space), space)
    honest = ClassifyService(backend, MODE_HONEST)
    attack = ClassifyService(backend, MODE_PR_ATTACK)
    rng = random.Random(11)
    for _ in range(50):
        x = random_instance(space, rng)
        assert honest.classify(x)[0] == attack.classify(x)[0]


def test_mlp_backend_rejects_categorical_space():
    space = FeatureSpace([
        FeatureSpec("colour", Categorical(("red", "blue")), LEGIT),
        FeatureSpec("debts", IntRange(0, 9), LEGIT),
        FeatureSpec("age", IntRange(18, 99), DISCRIMINATIVE),
    ])
    model = numeric_model(numeric_space())
    with pytest.raises(DataFormatError, match="categorical"):
        MlpBackend(model, space)


def test_mlp_backend_rejects_arity_mismatch():
    space = FeatureSpace([
        FeatureSpec("income", IntRange(0, 9), LEGIT),
        FeatureSpec("age", IntRange(18, 99), DISCRIMINATIVE),
    ])
    model = numeric_model(numeric_space())
    with pytest.raises(DataFormatError, match="inputs"):
        MlpBackend(model, space)


# -- rate limiter --------------------------------------------------------------------

class FrozenClock:
    def __init__(self, t=100.0):
        self.t = t

    def __call__(self):
        return self.t


def test_rate_limiter_budget_and_retry_after():
    clock = FrozenClock(0.0)
    limiter = RateLimiter(2, 10.0, clock=clock)
    assert limiter.allow("a") == (True, 0.0)
    clock.t = 2.0
    assert limiter.allow("a") == (True, 0.0)
    clock.t = 4.0
    allowed, retry_after = limiter.allow("a")
    assert not allowed
    assert retry_after == pytest.approx(6.0)  # first hit expires at t=10
    # the window slides: the t=0 hit falls out
    clock.t = 10.5
    assert limiter.allow("a") == (True, 0.0)


def test_rate_limiter_per_client_budgets():
    limiter = RateLimiter(1, 10.0, clock=FrozenClock())
    assert limiter.allow("a")[0]
    assert not limiter.allow("a")[0]
    assert limiter.allow("b")[0]


def test_rate_limiter_validation():
    with pytest.raises(DataFormatError):
        RateLimiter(0, 1.0)
    with pytest.raises(DataFormatError):
        RateLimiter(5, 0.0)


def test_rate_limiter_is_atomic_under_contention():
    limiter = RateLimiter(50, 1e9, clock=FrozenClock())
    admitted = []
    gate = threading.Barrier(16)

    def hammer():
        count = 0
        gate.wait()
        for _ in range(20):
            if limiter.allow("shared")[0]:
                count += 1
        admitted.append(count)

    threads = [threading.Thread(target=hammer) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(admitted) == 50


# -- HTTP front end --------------------------------------------------------------------

def test_health_does_not_disclose_mode(door_tree):
    with serving(tree_service(door_tree, MODE_PR_ATTACK)) as url:
        doc = requests.get(f"{url}/v1/health").json()
        assert doc == {"status": "ok"}


def test_http_classify_wire_shape(door_tree):
    with serving(tree_service(door_tree)) as url:
        resp = requests.post(f"{url}/v1/classify",
                             json=request_for(door_tree.space, ("yes", "pink", 49)))
        assert resp.status_code == 200
        doc = resp.json()
        assert set(doc) == {"decision", "explanation", "query_id"}
        assert doc["decision"] == 1
        assert isinstance(doc["query_id"], int)
        assert doc["explanation"] == {
            "predicates": [
                {"feature": "disguised", "op": "in", "value": ["yes"], "branch": True},
            ],
            "label": 1,
        }


def test_http_error_statuses(door_tree):
    with serving(tree_service(door_tree)) as url:
        assert requests.post(f"{url}/v1/classify", data=b"{not json").status_code == 400
        missing = requests.post(f"{url}/v1/classify", json={"client_id": "a"})
        assert missing.status_code == 400
        assert "error" in missing.json()
        bad = request_for(door_tree.space, ("yes", "pink", 49))
        bad["features"]["age"] = 300
        assert requests.post(f"{url}/v1/classify", json=bad).status_code == 400
        assert requests.get(f"{url}/v1/nope").status_code == 404
        assert requests.post(f"{url}/v1/nope", json={}).status_code == 404


def test_http_rate_limit_and_retry_header(door_tree):
    limiter = RateLimiter(2, 60.0)
    with serving(tree_service(door_tree), limiter) as url:
        req = request_for(door_tree.space, ("yes", "pink", 49))
        assert requests.post(f"{url}/v1/classify", json=req).status_code == 200
        assert requests.post(f"{url}/v1/classify", json=req).status_code == 200
        resp = requests.post(f"{url}/v1/classify", json=req)
        assert resp.status_code == 429
        assert int(resp.headers["Retry-After"]) >= 1


def test_remote_oracle_round_trip_and_transcript(door_tree):
    with serving(tree_service(door_tree, MODE_PR_ATTACK)) as url:
        oracle = RemoteOracle(url, "auditor", door_tree.space)
        assert oracle.health() == {"status": "ok"}
        assert oracle(("yes", "pink", 49)) == 1
        assert oracle(("yes", "pink", 62)) == 0
        assert [r.timestamp for r in oracle.transcript] == [0, 1]
        for rec in oracle.transcript:
            assert passes_user_checks(rec.explanation, rec.x, rec.decision,
                                      door_tree.space)
        pair = find_incoherent_pair(oracle.transcript, door_tree.space)
        assert pair is not None  # coherence is the one check that still bites


def test_remote_oracle_survives_rate_limiting(door_tree):
    limiter = RateLimiter(2, 0.2)
    with serving(tree_service(door_tree), limiter) as url:
        oracle = RemoteOracle(url, "auditor", door_tree.space, max_sleep=0.05)
        decisions = [oracle(("yes", "pink", 49)) for _ in range(6)]
        assert decisions == [1] * 6
        assert len(oracle.transcript) == 6


def test_remote_oracle_rejects_unreachable_host():
    oracle = RemoteOracle("http://127.0.0.1:9", "auditor",
                          FeatureSpace([FeatureSpec("a", IntRange(0, 1), LEGIT),
                                        FeatureSpec("d", IntRange(0, 1), DISCRIMINATIVE)]))
    with pytest.raises(requests.RequestException):
        oracle((0, 0))


class _RogueHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        self.rfile.read(length)
        body = json.dumps({"decision": 1,
                           "explanation": {"predicates": [], "label": 0},
                           "query_id": 1}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def test_remote_oracle_rejects_non_consequent_reply(door_space):
    server = ThreadingHTTPServer(("127.0.0.1", 0), _RogueHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        oracle = RemoteOracle(url, "auditor", door_space)
        with pytest.raises(ProtocolError, match="non-consequent"):
            oracle(("yes", "pink", 49))
        assert oracle.transcript == []
    finally:
        server.shutdown()
        server.server_close()


def test_remote_oracle_factory(tmp_path, door_space, door_tree):
    space_path = tmp_path / "space.yaml"
    door_space.save(space_path)
    with serving(tree_service(door_tree)) as url:
        oracle = remote_oracle({"url": url, "space": str(space_path),
                                "client_id": "carol", "max_sleep": 0.1})
        assert oracle.client_id == "carol"
        assert oracle.max_sleep == 0.1
        assert oracle(("no", "pink", 30)) == 1
    with pytest.raises(DataFormatError):
        remote_oracle({"url": "http://x"})
    with pytest.raises(DataFormatError):
        remote_oracle({"space": door_space})


def test_probe_csv_identical_in_process_and_over_http(tmp_path, door_tree):
    profiles = [("yes", "pink", 49), ("yes", "other", 62),
                ("no", "pink", 30), ("no", "other", 70)]
    service = tree_service(door_tree, MODE_PR_ATTACK)
    local = scenario_b_swap(lambda x: service.classify(x)[0], door_tree.space,
                            profiles, ("age",))
    with serving(tree_service(door_tree, MODE_PR_ATTACK)) as url:
        oracle = RemoteOracle(url, "auditor", door_tree.space)
        remote = scenario_b_swap(oracle, door_tree.space, profiles, ("age",))

    local_path = tmp_path / "local.csv"
    remote_path = tmp_path / "remote.csv"
    write_probe_csv(probe_summary_rows([local]), local_path)
    write_probe_csv(probe_summary_rows([remote]), remote_path)
    assert local_path.read_bytes() == remote_path.read_bytes()
    assert local.ips_found > 0  # the probe actually caught the attack


def test_honest_legit_tree_yields_clean_transcript(door_tree):
    legit_only = DecisionTree(door_tree.space, door_tree.root.right)
    with serving(ClassifyService(TreeBackend(legit_only), MODE_HONEST)) as url:
        oracle = RemoteOracle(url, "auditor", door_tree.space)
        rng = random.Random(17)
        for _ in range(60):
            oracle(random_instance(door_tree.space, rng))
        assert check_coherence_log(oracle.transcript, door_tree.space) == []
        for rec in oracle.transcript:
            assert passes_user_checks(rec.explanation, rec.x, rec.decision,
                                      door_tree.space)


# -- configuration ----------------------------------------------------------------------

def test_parse_listen():
    assert parse_listen("127.0.0.1:9000") == ("127.0.0.1", 9000)
    assert parse_listen("0.0.0.0:80") == ("0.0.0.0", 80)
    with pytest.raises(DataFormatError):
        parse_listen("8080")
    with pytest.raises(DataFormatError):
        parse_listen("host:")
    with pytest.raises(DataFormatError):
        parse_listen(":9000")


def test_service_from_config_doc_errors():
    with pytest.raises(DataFormatError):
        service_from_config_doc({"mode": "honest"})
    with pytest.raises(DataFormatError):
        service_from_config_doc({"backend": {"kind": "quantum"}})
    with pytest.raises(DataFormatError):
        service_from_config_doc([])


def test_load_service_config(tmp_path, door_tree, monkeypatch):
    monkeypatch.delenv("EXPLAUDIT_LISTEN", raising=False)
    tree_path = tmp_path / "tree.yaml"
    save_tree(door_tree, tree_path)
    config_path = tmp_path / "service.yaml"
    config_path.write_text(yaml.safe_dump({
        "backend": {"kind": "tree", "tree": str(tree_path)},
        "mode": "pr_attack",
        "rate_limit": {"max_requests": 5, "window_seconds": 2.0},
        "listen": "0.0.0.0:9100",
    }))
    service, limiter, host, port = load_service_config(config_path)
    assert service.mode == MODE_PR_ATTACK
    assert isinstance(service.backend, TreeBackend)
    assert limiter.max_requests == 5
    assert limiter.window_seconds == 2.0
    assert (host, port) == ("0.0.0.0", 9100)

    service, _, _, _ = load_service_config(config_path, mode_override="honest")
    assert service.mode == MODE_HONEST

    monkeypatch.setenv("EXPLAUDIT_LISTEN", "127.0.0.1:7777")
    _, _, host, port = load_service_config(config_path)
    assert (host, port) == ("127.0.0.1", 7777)


def test_load_service_config_mlp_backend(tmp_path, monkeypatch):
    monkeypatch.delenv("EXPLAUDIT_LISTEN", raising=False)
    space = numeric_space()
    model = numeric_model(space)
    model_path = tmp_path / "model.yaml"
    space_path = tmp_path / "space.yaml"
    save_mlp(model, model_path)
    space.save(space_path)
    config_path = tmp_path / "service.yaml"
    config_path.write_text(yaml.safe_dump({
        "backend": {"kind": "mlp", "model": str(model_path), "space": str(space_path)},
    }))
    service, limiter, host, port = load_service_config(config_path)
    assert service.mode == MODE_HONEST
    assert isinstance(service.backend, MlpBackend)
    assert (host, port) == ("127.0.0.1", 8080)
    assert service.classify((5, 5, 40))[0] in (0, 1)
