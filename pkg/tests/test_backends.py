import http.server
import json
import threading

import pytest

from conftest import make_client

from revbench.backends import HttpBackend, request_key
from revbench.errors import AuthError, TransportError
from revbench.templates import Decoding, render_prompt


class ScriptedHttpJudge(http.server.BaseHTTPRequestHandler):
    """Plays a queue of (status, body) responses and records request bodies."""

    script: list = []
    requests_seen: list = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        type(self).requests_seen.append((dict(self.headers), body))
        status, payload = self.script.pop(0) if self.script else (200, {"ok": True})
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_judge():
    ScriptedHttpJudge.script = []
    ScriptedHttpJudge.requests_seen = []
    server = http.server.HTTPServer(("127.0.0.1", 0), ScriptedHttpJudge)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", ScriptedHttpJudge
    server.shutdown()


def completion_body(text: str) -> dict:
    return {"choices": [{"message": {"content": text}}]}


def sample_prompt():
    return render_prompt(
        "support", {"url_content": "page text", "claim": "the claim"}, Decoding()
    )


class TestHttpBackend:
    def test_complete_round_trip(self, http_judge, monkeypatch):
        url, handler = http_judge
        monkeypatch.setenv("TEST_JUDGE_KEY", "sekret")
        handler.script = [(200, completion_body('{"result": "supported"}'))]
        backend = HttpBackend(url, auth_env="TEST_JUDGE_KEY")
        prompt = sample_prompt()
        assert backend.complete(prompt, "gpt-4.1-mini") == '{"result": "supported"}'
        headers, body = handler.requests_seen[0]
        assert headers.get("Authorization") == "Bearer sekret"
        assert body["model"] == "gpt-4.1-mini"
        assert body["temperature"] == 0.0
        assert [m["role"] for m in body["messages"]] == ["system", "user"]
        assert "<claim>\nthe claim\n</claim>" in body["messages"][1]["content"]

    def test_auth_failure_not_retried(self, http_judge):
        url, handler = http_judge
        handler.script = [(401, {"error": "bad key"})]
        client = make_client(HttpBackend(url))
        with pytest.raises(AuthError):
            client.complete(sample_prompt())
        assert len(handler.requests_seen) == 1

    def test_5xx_retried_then_succeeds(self, http_judge):
        url, handler = http_judge
        handler.script = [
            (500, {"error": "flaky"}),
            (503, {"error": "flaky"}),
            (200, completion_body("recovered")),
        ]
        client = make_client(HttpBackend(url))
        assert client.complete(sample_prompt()) == "recovered"
        assert len(handler.requests_seen) == 3

    def test_retry_exhaustion_raises_transport_error(self, http_judge):
        url, handler = http_judge
        handler.script = [(500, {})] * 5
        client = make_client(HttpBackend(url))
        with pytest.raises(TransportError):
            client.complete(sample_prompt())

    def test_malformed_completion_payload(self, http_judge):
        url, handler = http_judge
        handler.script = [(200, {"choices": []})] * 3
        backend = HttpBackend(url)
        with pytest.raises(TransportError):
            make_client(backend).complete(sample_prompt())

    def test_chat_parses_tool_calls(self, http_judge):
        url, handler = http_judge
        handler.script = [
            (
                200,
                {
                    "choices": [
                        {
                            "message": {
                                "content": None,
                                "tool_calls": [
                                    {
                                        "id": "call_1",
                                        "type": "function",
                                        "function": {
                                            "name": "web_search",
                                            "arguments": '{"query": "llm evals"}',
                                        },
                                    }
                                ],
                            }
                        }
                    ]
                },
            )
        ]
        backend = HttpBackend(url)
        response = backend.chat(
            [{"role": "user", "content": "hi"}],
            model="m",
            temperature=0.7,
            top_p=0.95,
            max_tokens=128,
            tools=[{"type": "function", "function": {"name": "web_search"}}],
        )
        assert response.content is None
        assert response.tool_calls[0].name == "web_search"
        assert response.tool_calls[0].arguments == {"query": "llm evals"}
        _, body = handler.requests_seen[0]
        assert body["top_p"] == 0.95 and "tools" in body


class TestRequestKey:
    def test_key_depends_on_decoding_and_model(self):
        a = render_prompt("support", {"url_content": "x", "claim": "c"}, Decoding(0.0, 100))
        b = render_prompt("support", {"url_content": "x", "claim": "c"}, Decoding(0.0, 200))
        assert request_key(a, "m1") != request_key(a, "m2")
        assert request_key(a, "m1") != request_key(b, "m1")
        assert request_key(a, "m1") == request_key(a, "m1")
