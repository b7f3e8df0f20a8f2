"""Prompt rendering, token estimation, and backend behavior."""

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finagent.llm import (
    BackendError,
    HttpBackend,
    LlmConfig,
    PromptTemplate,
    RenderError,
    ScriptedBackend,
    TaskKind,
    TransportError,
    complete,
    estimate_tokens,
    load_templates,
    render_prompt,
)


class TestEstimateTokens:
    def test_empty_string(self):
        assert estimate_tokens("") == 0

    def test_ascii_heuristic(self):
        assert estimate_tokens("a" * 400) == 100

    def test_rounds_up(self):
        assert estimate_tokens("abc") == 1
        assert estimate_tokens("abcde") == 2

    def test_utf8_counts_bytes(self):
        assert estimate_tokens("币" * 4) == 3  # 12 UTF-8 bytes

    @given(st.text(max_size=300), st.text(max_size=300))
    @settings(max_examples=1000, deadline=None)
    def test_subadditive_concatenation(self, a, b):
        assert estimate_tokens(a + b) <= estimate_tokens(a) + estimate_tokens(b) + 1

    @given(st.text(max_size=300), st.text(max_size=100))
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_length(self, a, suffix):
        assert estimate_tokens(a + suffix) >= estimate_tokens(a)


class TestTemplates:
    def test_packaged_templates_load(self, templates):
        assert set(templates) == set(TaskKind)
        for template in templates.values():
            assert template.slots  # every template has at least one slot

    def test_render_contains_query_verbatim(self, templates):
        rendered = render_prompt(
            templates[TaskKind.AGENT_META_GEN],
            {"query": "What moved NVDA today?", "grammar": "reply with JSON"},
        )
        assert "What moved NVDA today?" in rendered.text
        assert rendered.token_estimate == estimate_tokens(rendered.text)

    def test_unbound_slot_error_names_slot(self, templates):
        context = {
            "query": "q",
            "profile": "p",
            "plan_revision": "0",
            "summaries": "s",
            "candidates": "c",
            "tool_spec": "t",
            "grammar": "g",
        }  # everything except plan
        with pytest.raises(RenderError, match="'plan'"):
            render_prompt(templates[TaskKind.ACTION_TAKING], context)

    def test_rendering_is_deterministic(self, templates):
        context = {"query": "q", "grammar": "g"}
        first = render_prompt(templates[TaskKind.AGENT_META_GEN], context)
        second = render_prompt(templates[TaskKind.AGENT_META_GEN], context)
        assert first.text == second.text

    def test_no_residual_markers(self, templates):
        context = dict.fromkeys(
            (
                "query",
                "profile",
                "plan",
                "plan_revision",
                "summaries",
                "candidates",
                "tool_spec",
                "observation",
                "grammar",
            ),
            "bound",
        )
        for template in templates.values():
            text = render_prompt(template, context).text
            assert "$" not in text

    def test_dollar_in_slot_value_is_safe(self):
        template = PromptTemplate(task=TaskKind.ACTION_TAKING, body="price: $value end")
        rendered = render_prompt(template, {"value": "$100 (and ${more})"})
        assert rendered.text == "price: $100 (and ${more}) end"

    def test_custom_template_directory(self, tmp_path):
        for name in ("agent_meta", "action", "code_writing", "reflexion"):
            (tmp_path / f"{name}.txt").write_text(f"{name}: $query\n", encoding="utf-8")
        templates = load_templates(tmp_path)
        rendered = render_prompt(templates[TaskKind.CODE_WRITING], {"query": "hello"})
        assert rendered.text == "code_writing: hello\n"


class TestScriptedBackend:
    def test_replays_in_order(self):
        backend = ScriptedBackend([{"response": "one"}, {"response": "two"}])
        config = LlmConfig()
        assert backend.complete("p1", config) == "one"
        assert backend.complete("p2", config) == "two"
        assert backend.calls_made == 2

    def test_exhausted_transcript(self):
        backend = ScriptedBackend([{"response": "only"}])
        config = LlmConfig()
        backend.complete("p", config)
        with pytest.raises(BackendError, match="transcript exhausted"):
            backend.complete("p", config)

    def test_strict_mode_checks_prompt_hash(self):
        import hashlib

        good = hashlib.sha256(b"expected prompt").hexdigest()
        backend = ScriptedBackend(
            [{"response": "ok", "prompt_sha256": good}], strict=True
        )
        assert backend.complete("expected prompt", LlmConfig()) == "ok"
        backend = ScriptedBackend(
            [{"response": "ok", "prompt_sha256": good}], strict=True
        )
        with pytest.raises(BackendError, match="hash"):
            backend.complete("different prompt", LlmConfig())

    def test_from_file(self, tmp_path):
        path = tmp_path / "transcript.jsonl"
        path.write_text(
            json.dumps({"response": "hello"}) + "\n# comment\n", encoding="utf-8"
        )
        backend = ScriptedBackend.from_file(path)
        assert backend.complete("p", LlmConfig()) == "hello"

    def test_from_file_rejects_bad_records(self, tmp_path):
        path = tmp_path / "transcript.jsonl"
        path.write_text('{"no_response": 1}\n', encoding="utf-8")
        with pytest.raises(BackendError, match="missing 'response'"):
            ScriptedBackend.from_file(path)


class _StubHandler(BaseHTTPRequestHandler):
    canned_body = {"text": "stubbed completion"}
    fail_times = 0
    requests_seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append((self.headers.get("Authorization"), body))
        if type(self).fail_times > 0:
            type(self).fail_times -= 1
            self.close_connection = True
            return
        payload = json.dumps(self.canned_body).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    _StubHandler.requests_seen = []
    _StubHandler.fail_times = 0
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpBackend:
    def test_echoes_canned_body(self, stub_server):
        backend = HttpBackend(endpoint=stub_server, model="m1", token="secret")
        text = backend.complete("the prompt", LlmConfig(output_budget=64))
        assert text == "stubbed completion"
        auth, body = _StubHandler.requests_seen[-1]
        assert auth == "Bearer secret"
        assert body["prompt"] == "the prompt"
        assert body["max_tokens"] == 64

    def test_unreachable_endpoint_is_transport_error(self):
        backend = HttpBackend(endpoint="http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(TransportError):
            backend.complete("p", LlmConfig())

    def test_complete_retries_transport_failures(self, stub_server):
        _StubHandler.fail_times = 2
        backend = HttpBackend(endpoint=stub_server)
        assert complete(backend, LlmConfig(), "p", max_transport_retries=2) == (
            "stubbed completion"
        )

    def test_complete_surfaces_after_bounded_retries(self):
        class AlwaysDown:
            name = "down"

            def complete(self, prompt, config):
                raise TransportError("nope")

        with pytest.raises(TransportError):
            complete(AlwaysDown(), LlmConfig(), "p", max_transport_retries=2)


def test_llm_config_validation():
    with pytest.raises(ValueError):
        LlmConfig(context_budget=0)
    with pytest.raises(ValueError):
        LlmConfig(output_budget=-1)
