"""Scripted clients that drive a live service end to end.

The point is parity checking: a session driven here with a given user
model must export the same records as the offline policy run with that
user model. Everything goes through HTTP so the service contract itself
is what gets exercised.
"""

from __future__ import annotations

import warnings

import httpx

from .selective import UserModel
from .session import AWAITING, PENDING

__all__ = ["client_for_app", "drive_confirm", "drive_select", "run_simulation"]


def client_for_app(app) -> httpx.Client:
    """In-process client; no socket, same request semantics."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    return TestClient(app)


def _check(response: httpx.Response) -> dict:
    payload = response.json()
    if response.status_code >= 400:
        raise RuntimeError(
            f"{response.request.method} {response.request.url.path} -> "
            f"{response.status_code} {payload.get('code')}: "
            f"{payload.get('message')}"
        )
    return payload


def create_remote_session(
    client: httpx.Client,
    mode: str,
    tau: float,
    *,
    split: str = "test",
    offset: int = 0,
    limit: int | None = None,
    quorum: int = 3,
    seed: int | None = None,
) -> dict:
    body = {
        "mode": mode,
        "tau": tau,
        "split": split,
        "offset": offset,
        "limit": limit,
        "quorum": quorum,
        "seed": seed,
    }
    return _check(client.post("/sessions", json=body))


def drive_confirm(client: httpx.Client, sid: str, user: UserModel) -> list[dict]:
    """Have quorum-many workers submit the user model's verdict per item.

    A deterministic user model gives every worker the same answer, so the
    majority outcome is exactly the user's verdict.
    """
    summary = _check(client.get(f"/sessions/{sid}"))
    quorum = summary["quorum"]
    payload = _check(
        client.get(f"/sessions/{sid}/items", params={"state": AWAITING})
    )
    finished = []
    for item in payload["items"]:
        accept = user.judge(item["item_id"], item["candidate_correct"])
        for k in range(quorum):
            final = _check(
                client.post(
                    f"/sessions/{sid}/items/{item['item_id']}/judgments",
                    json={"worker_id": f"sim-{k}", "accept": accept},
                )
            )
        finished.append(final)
    return finished


def default_selector(item: dict) -> dict:
    """Pick the gold program when listed, otherwise rewrite verbatim."""
    for i, candidate in enumerate(item["candidates"]):
        if candidate["tokens"] == item["gold_tokens"]:
            return {"index": i}
    return {"rewrite": item["utterance"]}


def drive_select(client: httpx.Client, sid: str, selector=default_selector):
    """Submit one selection per pending item via the given chooser."""
    payload = _check(
        client.get(f"/sessions/{sid}/items", params={"state": PENDING})
    )
    finished = []
    for item in payload["items"]:
        action = selector(item)
        finished.append(
            _check(
                client.post(
                    f"/sessions/{sid}/items/{item['item_id']}/selection",
                    json=action,
                )
            )
        )
    return finished


def run_simulation(
    client: httpx.Client,
    mode: str,
    tau: float,
    user: UserModel | None = None,
    *,
    split: str = "test",
    offset: int = 0,
    limit: int | None = None,
    quorum: int = 3,
    seed: int | None = None,
    selector=default_selector,
) -> dict:
    """Create, drive, and export one session; returns the full trace."""
    summary = create_remote_session(
        client, mode, tau,
        split=split, offset=offset, limit=limit, quorum=quorum, seed=seed,
    )
    sid = summary["session_id"]
    if mode == "select":
        drive_select(client, sid, selector)
    else:
        drive_confirm(client, sid, user or UserModel())
    report = _check(client.get(f"/sessions/{sid}/report"))
    export = _check(client.get(f"/sessions/{sid}/export"))
    return {
        "session": _check(client.get(f"/sessions/{sid}")),
        "report": report,
        "records": export["records"],
    }
