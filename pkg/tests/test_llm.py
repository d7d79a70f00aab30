import json
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from syndial.errors import AuthFailure, BackendUnavailable, MalformedResponse
from syndial.llm import CallLedger, ChatRequest, MockBackend, OpenAIBackend
from syndial.metrics import ScoreCard
from syndial.prompts import (
    PromptSet,
    approx_token_count,
    build_generation_prompt,
    build_summarization_prompt,
    fmt_number,
)


def gen_request(note_id="n1", iteration=1, prompt="p"):
    return ChatRequest(prompt=prompt, note_id=note_id, purpose="generate", iteration=iteration)


# --- mock ----------------------------------------------------------------------


def test_mock_returns_scripted_text_verbatim():
    mock = MockBackend.from_entries([{"note_id": "n1", "purpose": "generate", "iteration": 2, "text": "Doctor: hi\n"}])
    assert mock.complete(gen_request(iteration=2)).text == "Doctor: hi\n"
    assert len(mock.ledger) == 1


def test_mock_fallbacks_and_miss():
    mock = MockBackend.from_entries(
        [
            {"note_id": "n1", "purpose": "generate", "text": "any iteration"},
            {"note_id": "*", "purpose": "summarize", "text": "summary"},
        ]
    )
    assert mock.complete(gen_request(iteration=3)).text == "any iteration"
    assert mock.complete(ChatRequest(prompt="p", note_id="zz", purpose="summarize")).text == "summary"
    with pytest.raises(BackendUnavailable):
        mock.complete(gen_request(note_id="other"))
    assert len(mock.ledger) == 2


def test_mock_is_order_independent_under_concurrency():
    entries = [{"note_id": str(i), "purpose": "generate", "iteration": it, "text": f"{i}-{it}"} for i in range(30) for it in (1, 2, 3)]
    mock = MockBackend.from_entries(entries, max_concurrency=4)
    keys = [(str(i), it) for i in range(30) for it in (1, 2, 3)][::-1]
    with ThreadPoolExecutor(8) as pool:
        out = list(pool.map(lambda k: mock.complete(gen_request(k[0], k[1])).text, keys))
    assert out == [f"{i}-{it}" for i, it in keys]
    assert len(mock.ledger) == len(keys)


def test_mock_script_file(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps([{"note_id": "a", "purpose": "extract_concepts", "target": "note", "text": "Hypertension\nChest pain"}]))
    mock = MockBackend.from_file(path)
    assert mock.extract_concepts("note text", "a", target="note") == ["Hypertension", "Chest pain"]


def test_extract_concepts_keeps_blank_lines_and_handles_empty():
    mock = MockBackend.from_entries(
        [
            {"note_id": "a", "purpose": "extract_concepts", "text": "Fever\n\nCough"},
            {"note_id": "b", "purpose": "extract_concepts", "text": ""},
        ]
    )
    assert mock.extract_concepts("t", "a") == ["Fever", "", "Cough"]
    assert mock.extract_concepts("t", "b") == []
    with pytest.raises(BackendUnavailable):
        mock.extract_concepts("t", "missing")


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(prompt="")
    with pytest.raises(ValueError):
        ChatRequest(prompt="p", purpose="generate")  # iteration required
    with pytest.raises(ValueError):
        ChatRequest(prompt="p", purpose="summarize", iteration=1)


def test_ledger_counts_concurrent_appends():
    mock = MockBackend.from_entries([{"note_id": "*", "purpose": "generate", "text": "x"}], max_concurrency=3)
    with ThreadPoolExecutor(16) as pool:
        list(pool.map(lambda i: mock.complete(gen_request(str(i))), range(500)))
    assert len(mock.ledger) == 500
    assert mock.ledger.count("generate") == 500


def test_inflight_requests_are_bounded():
    active, peak = 0, 0
    lock = threading.Lock()
    gate = threading.Event()

    class Slow(MockBackend):
        def _complete(self, req):
            nonlocal active, peak
            with lock:
                active += 1
                peak = max(peak, active)
            gate.wait(0.02)
            with lock:
                active -= 1
            return super()._complete(req)

    mock = Slow({("*", "generate", None, None): "x"}, max_concurrency=2)
    with ThreadPoolExecutor(8) as pool:
        list(pool.map(lambda i: mock.complete(gen_request(str(i))), range(16)))
    assert peak <= 2


def test_ledger_roundtrip(tmp_path):
    mock = MockBackend.from_entries([{"note_id": "*", "purpose": "generate", "text": "x"}])
    mock.complete(gen_request("a", 1))
    mock.complete(gen_request("a", 2))
    mock.ledger.write_jsonl(tmp_path / "ledger.jsonl")
    back = CallLedger.read_jsonl(tmp_path / "ledger.jsonl")
    assert [(e.note_id, e.iteration) for e in back.entries] == [("a", 1), ("a", 2)]


# --- HTTP ----------------------------------------------------------------------


def _ok(text="Doctor: hello", usage=True):
    payload = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage:
        payload["usage"] = {"prompt_tokens": 11, "completion_tokens": 7}
    return httpx.Response(200, json=payload)


def _backend(responses, **kwargs):
    seen = []
    replies = iter(responses)

    def handler(request):
        seen.append(request)
        reply = next(replies)
        if isinstance(reply, Exception):
            raise reply
        return reply

    backend = OpenAIBackend(
        base_url="http://llm.test", api_key="secret", transport=httpx.MockTransport(handler), sleep=lambda s: None, **kwargs
    )
    return backend, seen


def test_http_request_shape_and_usage():
    backend, seen = _backend([_ok()])
    resp = backend.complete(gen_request(prompt="write a dialogue"))
    assert resp.text == "Doctor: hello"
    assert (resp.prompt_tokens, resp.completion_tokens) == (11, 7)
    req = seen[0]
    assert req.url.path == "/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer secret"
    body = json.loads(req.content)
    assert body["messages"] == [{"role": "user", "content": "write a dialogue"}]
    assert set(body) == {"model", "messages", "temperature", "max_tokens"}


def test_http_missing_usage_gives_zero_tokens():
    backend, _ = _backend([_ok(usage=False)])
    resp = backend.complete(gen_request())
    assert (resp.prompt_tokens, resp.completion_tokens) == (0, 0)


def test_http_429_then_200_retries_once():
    backend, seen = _backend([httpx.Response(429), _ok()])
    assert backend.complete(gen_request()).text == "Doctor: hello"
    assert len(seen) == 2
    assert len(backend.ledger) == 1


def test_http_transport_error_is_retried():
    backend, seen = _backend([httpx.ConnectError("boom"), httpx.Response(503), _ok()])
    backend.complete(gen_request())
    assert len(seen) == 3


def test_http_401_is_auth_failure_without_ledger_entry():
    backend, seen = _backend([httpx.Response(401)])
    with pytest.raises(AuthFailure):
        backend.complete(gen_request())
    assert len(seen) == 1
    assert len(backend.ledger) == 0


def test_http_gives_up_after_retries():
    sleeps = []
    backend, seen = _backend([httpx.Response(500)] * 3, max_retries=2)
    backend._sleep = sleeps.append
    with pytest.raises(BackendUnavailable):
        backend.complete(gen_request())
    assert len(seen) == 3
    assert sleeps == [0.5, 1.0]
    assert len(backend.ledger) == 0


def test_http_malformed_response():
    backend, _ = _backend([httpx.Response(200, json={"choices": []})])
    with pytest.raises(MalformedResponse):
        backend.complete(gen_request())


def test_api_key_from_environment(monkeypatch):
    monkeypatch.setenv("MY_KEY", "from-env")
    seen = []

    def handler(request):
        seen.append(request)
        return _ok()

    backend = OpenAIBackend(base_url="http://llm.test", api_key_env="MY_KEY", transport=httpx.MockTransport(handler))
    backend.complete(gen_request())
    assert seen[0].headers["authorization"] == "Bearer from-env"


# --- prompts -------------------------------------------------------------------

NOTE = "Patient presents with chest pain and hypertension."


def test_first_prompt_has_instruction_note_and_cue():
    p = build_generation_prompt(NOTE, None, 0.1, None)
    assert "write a conversation between the patient and the doctor" in p
    assert NOTE in p
    assert "rouge score" not in p
    assert p.endswith("Dialogue:")


def test_feedback_prompt_reports_score_and_weights():
    card = ScoreCard(extractiveness=0.4, similarity=0.6, alpha=0.1, combined=0.42)
    p = build_generation_prompt(NOTE, card, 0.1, None)
    assert "combined rouge score for both extractiveness and similarity" in p
    assert "0.42" in p
    assert "extractiveness should weigh 0.9" in p
    assert "similarity should weigh 0.1" in p
    assert NOTE in p
    assert p.endswith("Dialogue:")


def test_history_appears_before_cue():
    p = build_generation_prompt(NOTE, None, 0.0, "Doctor: how was the last visit?")
    assert p.index("Doctor: how was the last visit?") < p.rindex("Dialogue:")
    assert p.endswith("Dialogue:")


@pytest.mark.parametrize("x, s", [(0.9, "0.9"), (1 - 0.7, "0.3"), (0.52191234, "0.5219"), (0, "0"), (1, "1")])
def test_number_formatting(x, s):
    assert fmt_number(x) == s


def test_summarization_prompt():
    assert "300" in build_summarization_prompt(NOTE)
    assert "200" in build_summarization_prompt(NOTE, 200)
    assert build_summarization_prompt("").strip()


def test_template_override(tmp_path):
    (tmp_path / "extract_concepts.txt").write_text("CONCEPTS PLEASE\n{text}\n")
    prompts = PromptSet.load(tmp_path)
    assert prompts.extraction("abc") == "CONCEPTS PLEASE\nabc"
    # files that are not overridden fall back to the bundled ones
    assert prompts.generation(NOTE).endswith("Dialogue:")


@pytest.mark.parametrize("words, tokens", [(0, 0), (1, 2), (3, 4), (3000, 4000), (3001, 4002)])
def test_approx_token_count(words, tokens):
    assert approx_token_count(" ".join(["w"] * words)) == tokens
