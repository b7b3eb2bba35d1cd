"""The office gateway: address leasing, accounts, and the HTTP control API.

The service wraps one live simulation.  Every mutation of device state
funnels through the simulation's command queue and is acknowledged with the
resulting change, so concurrent clients serialize cleanly.  Accounts,
leases, and the rule table persist to a single JSON state file that is
rewritten atomically on every change.

Endpoints (JSON bodies, ``Authorization: Bearer <token>`` except login):

    POST   /login                                {username, password}
    GET    /devices
    GET    /devices/{id}
    PUT    /devices/{id}/properties/{name}       {value}
    GET    /rules
    POST   /rules                                {text}
    PUT    /rules/{name}                         {text} or {enabled}
    DELETE /rules/{name}
    GET    /events?after={cursor}
    POST   /stimuli                              stimulus fields (admin)
    GET    /metrics/report
    POST   /accounts                             {username, password, role} (admin)
    PUT    /accounts/{username}/password         {old_password, new_password}

Errors use {code, message, detail} bodies with stable code strings.
"""

from __future__ import annotations

import hashlib
import hmac
import ipaddress
import json
import math
import os
import secrets
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional
from urllib.parse import parse_qs, unquote, urlparse

from .devices import (
    DeviceError,
    DomainError,
    UnknownDeviceError,
    UnknownPropertyError,
    WritePermissionError,
)
from .metrics import accumulate, baseline_transform, default_profile, sdg_report
from .rules import (
    Rule,
    RuleError,
    RuleSet,
    RuleSyntaxError,
    actions_text,
    condition_text,
    parse_ruleset,
    serialize_rule,
    serialize_ruleset,
)
from .simulation import Scenario, Simulation, Stimulus, run_scenario
from .trace import snapshot_record

GATEWAY_ADDRESS = "192.168.25.1"
POOL_START = "192.168.25.100"
POOL_END = "192.168.25.249"
SESSION_TTL_S = 30 * 60

ROLE_ADMIN = "admin"
ROLE_VIEWER = "viewer"


class GatewayError(Exception):
    code = "gateway_error"
    status = 500


class AuthError(GatewayError):
    """Uniform authentication failure; never says which part was wrong."""
    code = "auth_failed"
    status = 401

    def __init__(self, message: str = "invalid credentials or session"):
        super().__init__(message)


class RoleError(GatewayError):
    code = "forbidden"
    status = 403


class NotFoundError(GatewayError):
    code = "not_found"
    status = 404


class ConflictError(GatewayError):
    code = "conflict"
    status = 409


class CapacityError(GatewayError):
    code = "pool_exhausted"
    status = 409


class BadRequestError(GatewayError):
    code = "bad_request"
    status = 400


@dataclass(frozen=True)
class AddressLease:
    device_id: str
    address: str
    issued_at: float
    segment: str = "office"

    def to_json(self) -> dict[str, Any]:
        return {"device_id": self.device_id, "address": self.address,
                "issued_at": self.issued_at, "segment": self.segment}


@dataclass
class Account:
    username: str
    salt: str
    digest: str
    role: str
    must_change_password: bool = False

    def to_json(self) -> dict[str, Any]:
        return {"username": self.username, "salt": self.salt,
                "digest": self.digest, "role": self.role,
                "must_change_password": self.must_change_password}


@dataclass(frozen=True)
class Session:
    token: str
    username: str
    role: str
    expires_at: float


def _digest(password: str, salt: str) -> str:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                               bytes.fromhex(salt), 50_000).hex()


class AccountStore:
    """Salted-hash account records; verification is constant-time."""

    def __init__(self):
        self._accounts: dict[str, Account] = {}
        self._lock = threading.Lock()

    def bootstrap(self) -> None:
        if not self._accounts:
            self.create("admin", "admin", ROLE_ADMIN, must_change_password=True)

    def create(self, username: str, password: str, role: str,
               must_change_password: bool = False) -> Account:
        if role not in (ROLE_ADMIN, ROLE_VIEWER):
            raise BadRequestError(f"unknown role {role!r}")
        if not username or not password:
            raise BadRequestError("username and password must not be empty")
        with self._lock:
            if username in self._accounts:
                raise ConflictError(f"account {username!r} already exists")
            salt = secrets.token_hex(16)
            account = Account(username, salt, _digest(password, salt), role,
                              must_change_password)
            self._accounts[username] = account
            return account

    def verify(self, username: str, password: str) -> Account:
        with self._lock:
            account = self._accounts.get(username)
        if account is None:
            # Burn the same work as a real check so timing stays flat.
            _digest(password, "00" * 16)
            raise AuthError()
        if not hmac.compare_digest(_digest(password, account.salt),
                                   account.digest):
            raise AuthError()
        return account

    def change_password(self, username: str, old: str, new: str) -> None:
        account = self.verify(username, old)
        if not new:
            raise BadRequestError("new password must not be empty")
        with self._lock:
            salt = secrets.token_hex(16)
            account.salt = salt
            account.digest = _digest(new, salt)
            account.must_change_password = False

    def get(self, username: str) -> Optional[Account]:
        with self._lock:
            return self._accounts.get(username)

    def all(self) -> list[Account]:
        with self._lock:
            return list(self._accounts.values())

    def restore(self, rows: list[dict[str, Any]]) -> None:
        with self._lock:
            for row in rows:
                self._accounts[row["username"]] = Account(
                    row["username"], row["salt"], row["digest"], row["role"],
                    row.get("must_change_password", False))


class SessionStore:
    """Random bearer tokens with a wall-clock expiry."""

    def __init__(self, ttl_s: float = SESSION_TTL_S,
                 clock: Callable[[], float] = time.time):
        self.ttl_s = ttl_s
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def issue(self, account: Account) -> Session:
        token = secrets.token_urlsafe(16)
        session = Session(token, account.username, account.role,
                          self.clock() + self.ttl_s)
        with self._lock:
            self._sessions[token] = session
        return session

    def resolve(self, token: Optional[str]) -> Session:
        if not token:
            raise AuthError()
        with self._lock:
            session = self._sessions.get(token)
        if session is None or session.expires_at <= self.clock():
            raise AuthError()
        return session

    def drop(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)


class LeasePool:
    """Sequential address allocation, idempotent per device."""

    def __init__(self, start: str = POOL_START, end: str = POOL_END):
        first = ipaddress.IPv4Address(start)
        last = ipaddress.IPv4Address(end)
        if last < first:
            raise ValueError("pool end precedes pool start")
        self._addresses = [str(ipaddress.IPv4Address(int(first) + offset))
                           for offset in range(int(last) - int(first) + 1)]
        self._by_device: dict[str, AddressLease] = {}
        self._in_use: set[str] = set()
        self._lock = threading.Lock()

    def register(self, device_id: str, issued_at: float = 0.0,
                 segment: str = "office") -> AddressLease:
        with self._lock:
            existing = self._by_device.get(device_id)
            if existing is not None:
                return existing
            for address in self._addresses:
                if address not in self._in_use:
                    lease = AddressLease(device_id, address, issued_at, segment)
                    self._by_device[device_id] = lease
                    self._in_use.add(address)
                    return lease
            raise CapacityError("address pool exhausted")

    def release(self, device_id: str) -> None:
        with self._lock:
            lease = self._by_device.pop(device_id, None)
            if lease is not None:
                self._in_use.discard(lease.address)

    def lease_for(self, device_id: str) -> Optional[AddressLease]:
        with self._lock:
            return self._by_device.get(device_id)

    def all(self) -> list[AddressLease]:
        with self._lock:
            return list(self._by_device.values())

    def restore(self, rows: list[dict[str, Any]]) -> None:
        with self._lock:
            for row in rows:
                lease = AddressLease(row["device_id"], row["address"],
                                     row.get("issued_at", 0.0),
                                     row.get("segment", "office"))
                self._by_device[lease.device_id] = lease
                self._in_use.add(lease.address)


class LiveSimulation:
    """A simulation advanced by a wall-clock thread, one tick per interval.

    All access to the underlying simulation goes through the internal lock;
    external writes are queued and acknowledged once the tick that applies
    them completes.
    """

    def __init__(self, scenario: Optional[Scenario] = None,
                 tick_interval: float = 1.0):
        self.scenario = scenario or Scenario(duration=math.inf, snapshot_every=60)
        self.sim = Simulation(self.scenario)
        self.tick_interval = tick_interval
        self.lock = threading.Lock()
        self.fault: Optional[Exception] = None
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._loop, name="officetwin-sim",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _loop(self) -> None:
        while not self._stop.wait(self.tick_interval):
            with self.lock:
                if self.sim.env.sim_time >= self.scenario.duration:
                    continue
                try:
                    self.sim.tick()
                except Exception as err:
                    self.fault = err
                    return

    def _check_fault(self) -> None:
        if self.fault is not None:
            raise GatewayError(f"simulation halted: {self.fault}")

    def put_property(self, device_id: str, prop: str, value: Any,
                     cause: str, timeout: Optional[float] = None) -> Any:
        """Queue a write and wait for the tick that applies it; returns the
        StateChange (or None for a no-op write)."""
        self._check_fault()
        done = threading.Event()
        outcome: list[Any] = []

        def on_done(result: Any) -> None:
            outcome.append(result)
            done.set()

        with self.lock:
            self.sim.enqueue_command(device_id, prop, value, cause, on_done)
        wait = timeout if timeout is not None else max(4 * self.tick_interval, 2.0)
        if not done.wait(wait):
            self._check_fault()
            raise GatewayError("simulation did not acknowledge the write in time")
        result = outcome[0]
        if isinstance(result, Exception):
            raise result
        return result

    def inject_stimulus(self, stimulus: Stimulus) -> None:
        self._check_fault()
        with self.lock:
            self.sim.enqueue_stimulus(stimulus)

    def events_after(self, cursor: int) -> tuple[int, list[dict[str, Any]]]:
        with self.lock:
            records = self.sim.records
            end = len(records)
            window = list(records[max(cursor, 0):end])
        return end, window

    def device_values(self) -> dict[str, dict[str, Any]]:
        with self.lock:
            return {device: dict(state.values)
                    for device, state in self.sim.world.items()}

    def ruleset(self) -> RuleSet:
        with self.lock:
            return RuleSet(list(self.sim.ruleset.rules))

    def replace_ruleset(self, ruleset: RuleSet) -> None:
        with self.lock:
            self.sim.ruleset = ruleset

    def report_inputs(self) -> tuple[list[dict[str, Any]], Scenario]:
        """A complete trace copy plus the scenario observed so far."""
        with self.lock:
            elapsed = self.sim.env.sim_time
            records = list(self.sim.records)
            env_fields = self.sim.env.to_json()
            stimuli = sorted(self.sim.applied_stimuli, key=lambda s: s.at)
            ruleset = RuleSet(list(self.sim.ruleset.rules))
            scenario = self.scenario
        last = records[-1] if records else None
        if last is None or last.get("type") != "snapshot" or last.get("t") != elapsed:
            records.append(snapshot_record(elapsed, env_fields))
        observed = Scenario(
            seed=scenario.seed,
            duration=elapsed,
            timestep=scenario.timestep,
            stimuli=stimuli,
            ruleset=ruleset,
            catalog=scenario.catalog,
            constants=scenario.constants,
            snapshot_every=scenario.snapshot_every,
            work_window=scenario.work_window or (0.0, elapsed),
            max_passes=scenario.max_passes,
        )
        return records, observed


class Gateway:
    """Application logic behind the HTTP surface; usable directly in tests."""

    def __init__(self, live: LiveSimulation, state_path: Optional[str] = None,
                 clock: Callable[[], float] = time.time,
                 session_ttl_s: float = SESSION_TTL_S):
        self.live = live
        self.state_path = state_path
        self.accounts = AccountStore()
        self.sessions = SessionStore(session_ttl_s, clock)
        self.pool = LeasePool()
        self.profile = default_profile()
        self._state_lock = threading.Lock()
        self._load_or_bootstrap()
        self._register_catalog()

    # -- persistence ---------------------------------------------------------

    def _load_or_bootstrap(self) -> None:
        if self.state_path and os.path.exists(self.state_path):
            with open(self.state_path, encoding="utf-8") as fh:
                data = json.load(fh)
            self.accounts.restore(data.get("accounts", []))
            self.pool.restore(data.get("leases", []))
            rules_text = data.get("rules")
            if rules_text:
                self.live.replace_ruleset(parse_ruleset(rules_text))
        else:
            self.accounts.bootstrap()
            self._persist()

    def _persist(self) -> None:
        if not self.state_path:
            return
        state = {
            "accounts": [a.to_json() for a in self.accounts.all()],
            "leases": [l.to_json() for l in self.pool.all()],
            "rules": serialize_ruleset(self.live.ruleset()),
        }
        with self._state_lock:
            tmp = f"{self.state_path}.tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(state, fh, indent=2)
                fh.write("\n")
            os.replace(tmp, self.state_path)

    def _register_catalog(self) -> None:
        for descriptor in self.live.sim.catalog:
            self.pool.register(descriptor.device_id, issued_at=0.0,
                               segment=descriptor.segment)
        self._persist()

    # -- operations ----------------------------------------------------------

    def register_device(self, device_id: str) -> AddressLease:
        if device_id not in self.live.sim.catalog:
            raise NotFoundError(f"no device {device_id!r} in catalog")
        with self.live.lock:
            issued_at = self.live.sim.env.sim_time
        lease = self.pool.register(
            device_id, issued_at,
            self.live.sim.catalog.get(device_id).segment)
        self._persist()
        return lease

    def authenticate(self, username: str, password: str) -> tuple[Session, Account]:
        account = self.accounts.verify(username, password)
        return self.sessions.issue(account), account

    def create_account(self, session: Session, username: str, password: str,
                       role: str) -> Account:
        self.require_admin(session)
        account = self.accounts.create(username, password, role)
        self._persist()
        return account

    def change_password(self, session: Session, username: str, old: str,
                        new: str) -> None:
        if session.username != username and session.role != ROLE_ADMIN:
            raise RoleError("may only change your own password")
        self.accounts.change_password(username, old, new)
        self._persist()

    def require_admin(self, session: Session) -> None:
        if session.role != ROLE_ADMIN:
            raise RoleError("administrator role required")

    def device_view(self, device_id: Optional[str] = None) -> Any:
        values = self.live.device_values()
        views = []
        for descriptor in self.live.sim.catalog:
            if device_id is not None and descriptor.device_id != device_id:
                continue
            lease = self.pool.lease_for(descriptor.device_id)
            views.append({
                "id": descriptor.device_id,
                "kind": descriptor.kind,
                "display_name": descriptor.display_name,
                "serial": descriptor.serial,
                "segment": descriptor.segment,
                "address": lease.address if lease else None,
                "properties": [p.to_json() for p in descriptor.properties],
                "state": values.get(descriptor.device_id, {}),
            })
        if device_id is not None:
            if not views:
                raise NotFoundError(f"no device {device_id!r}")
            return views[0]
        return views

    def put_property(self, session: Session, device_id: str, prop: str,
                     value: Any) -> Any:
        self.require_admin(session)
        if device_id not in self.live.sim.catalog:
            raise NotFoundError(f"no device {device_id!r}")
        return self.live.put_property(device_id, prop, value,
                                      f"command:{session.username}")

    def rules_view(self) -> list[dict[str, Any]]:
        return [
            {
                "name": rule.name,
                "enabled": rule.enabled,
                "condition": condition_text(rule.condition),
                "actions": actions_text(rule.actions),
                "text": serialize_rule(rule),
            }
            for rule in self.live.ruleset()
        ]

    def add_rule(self, session: Session, text: str) -> Rule:
        self.require_admin(session)
        parsed = parse_ruleset(text)
        if len(parsed) != 1:
            raise BadRequestError("expected exactly one rule")
        rule = parsed.rules[0]
        current = self.live.ruleset()
        if any(r.name == rule.name for r in current):
            raise ConflictError(f"rule {rule.name!r} already exists")
        self.live.replace_ruleset(RuleSet(current.rules + [rule]))
        self._persist()
        return rule

    def update_rule(self, session: Session, name: str,
                    text: Optional[str] = None,
                    enabled: Optional[bool] = None) -> Rule:
        self.require_admin(session)
        current = self.live.ruleset()
        index = next((i for i, r in enumerate(current.rules) if r.name == name),
                     None)
        if index is None:
            raise NotFoundError(f"no rule named {name!r}")
        rule = current.rules[index]
        if text is not None:
            parsed = parse_ruleset(text)
            if len(parsed) != 1:
                raise BadRequestError("expected exactly one rule")
            replacement = parsed.rules[0]
            clash = any(r.name == replacement.name and i != index
                        for i, r in enumerate(current.rules))
            if clash:
                raise ConflictError(f"rule {replacement.name!r} already exists")
            rule = replacement
        if enabled is not None:
            rule = Rule(rule.name, rule.condition, rule.actions, bool(enabled))
        rules = list(current.rules)
        rules[index] = rule
        self.live.replace_ruleset(RuleSet(rules))
        self._persist()
        return rule

    def delete_rule(self, session: Session, name: str) -> None:
        self.require_admin(session)
        current = self.live.ruleset()
        remaining = [r for r in current.rules if r.name != name]
        if len(remaining) == len(current.rules):
            raise NotFoundError(f"no rule named {name!r}")
        self.live.replace_ruleset(RuleSet(remaining))
        self._persist()

    def inject_stimulus(self, session: Session, data: dict[str, Any]) -> None:
        self.require_admin(session)
        try:
            stimulus = Stimulus.from_json({**data, "at": 0.0})
        except Exception as err:
            raise BadRequestError(str(err)) from None
        self.live.inject_stimulus(stimulus)

    def metrics_report(self) -> dict[str, Any]:
        records, observed = self.live.report_inputs()
        automated = accumulate(records, self.profile)
        baseline_scenario = baseline_transform(observed)
        baseline_records = run_scenario(baseline_scenario)
        baseline = accumulate(baseline_records, self.profile)
        report = sdg_report(automated, baseline)
        return {
            "report": report.to_json(),
            "automated": automated.to_json(),
            "baseline": baseline.to_json(),
        }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def _error_body(code: str, message: str, detail: Any = None) -> bytes:
    return json.dumps({"code": code, "message": message,
                       "detail": detail}).encode("utf-8")


class GatewayHandler(BaseHTTPRequestHandler):
    server_version = "officetwin"
    protocol_version = "HTTP/1.1"
    gateway: Gateway = None  # type: ignore[assignment]

    def log_message(self, format: str, *args: Any) -> None:
        pass

    # -- plumbing ------------------------------------------------------------

    def _send(self, status: int, body: Optional[bytes],
              content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers",
                         "Authorization, Content-Type")
        self.send_header("Access-Control-Allow-Methods",
                         "GET, POST, PUT, DELETE, OPTIONS")
        if body is None:
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: Any) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"))

    def _send_error(self, err: Exception) -> None:
        if isinstance(err, GatewayError):
            self._send(err.status, _error_body(err.code, str(err)))
        elif isinstance(err, RuleSyntaxError):
            self._send(400, _error_body(
                "rule_syntax", str(err),
                {"line": err.line, "column": err.column}))
        elif isinstance(err, (UnknownDeviceError, UnknownPropertyError)):
            self._send(404, _error_body("not_found", str(err)))
        elif isinstance(err, WritePermissionError):
            self._send(403, _error_body("sensor_readonly", str(err)))
        elif isinstance(err, DomainError):
            self._send(400, _error_body("domain", str(err)))
        elif isinstance(err, (RuleError, DeviceError)):
            self._send(400, _error_body("bad_request", str(err)))
        else:
            self._send(500, _error_body("internal", str(err)))

    def _body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as err:
            raise BadRequestError(f"body is not valid JSON: {err}") from None
        if not isinstance(data, dict):
            raise BadRequestError("body must be a JSON object")
        return data

    def _session(self) -> Session:
        header = self.headers.get("Authorization") or ""
        token = header[7:] if header.startswith("Bearer ") else None
        return self.gateway.sessions.resolve(token)

    # -- dispatch ------------------------------------------------------------

    def do_OPTIONS(self) -> None:
        self._send(204, None)

    def do_GET(self) -> None:
        self._route("GET")

    def do_POST(self) -> None:
        self._route("POST")

    def do_PUT(self) -> None:
        self._route("PUT")

    def do_DELETE(self) -> None:
        self._route("DELETE")

    def _route(self, method: str) -> None:
        try:
            parsed = urlparse(self.path)
            parts = [unquote(p) for p in parsed.path.split("/") if p]
            query = parse_qs(parsed.query)
            self._dispatch(method, parts, query)
        except Exception as err:  # every failure maps to a structured body
            try:
                self._send_error(err)
            except (BrokenPipeError, ConnectionResetError):
                pass

    def _dispatch(self, method: str, parts: list[str],
                  query: dict[str, list[str]]) -> None:
        gw = self.gateway
        if method == "POST" and parts == ["login"]:
            body = self._body()
            session, account = gw.authenticate(
                str(body.get("username", "")), str(body.get("password", "")))
            self._send_json(200, {
                "token": session.token,
                "role": session.role,
                "must_change_password": account.must_change_password,
                "expires_in_s": gw.sessions.ttl_s,
            })
            return

        session = self._session()

        if method == "GET" and parts == ["devices"]:
            self._send_json(200, {"devices": gw.device_view()})
        elif method == "GET" and len(parts) == 2 and parts[0] == "devices":
            self._send_json(200, gw.device_view(parts[1]))
        elif (method == "PUT" and len(parts) == 4 and parts[0] == "devices"
              and parts[2] == "properties"):
            body = self._body()
            if "value" not in body:
                raise BadRequestError("body must carry a value field")
            change = gw.put_property(session, parts[1], parts[3], body["value"])
            payload = change.to_json() if change is not None else None
            self._send_json(200, {"change": payload})
        elif method == "GET" and parts == ["rules"]:
            self._send_json(200, {"rules": gw.rules_view()})
        elif method == "POST" and parts == ["rules"]:
            body = self._body()
            rule = gw.add_rule(session, str(body.get("text", "")))
            self._send_json(201, {"rule": serialize_rule(rule)})
        elif method == "PUT" and len(parts) == 2 and parts[0] == "rules":
            body = self._body()
            rule = gw.update_rule(
                session, parts[1],
                text=body.get("text"),
                enabled=body.get("enabled"))
            self._send_json(200, {"rule": serialize_rule(rule)})
        elif method == "DELETE" and len(parts) == 2 and parts[0] == "rules":
            gw.delete_rule(session, parts[1])
            self._send(204, None)
        elif method == "GET" and parts == ["events"]:
            after = int(query.get("after", ["0"])[0])
            cursor, events = gw.live.events_after(after)
            self._send_json(200, {"cursor": cursor, "events": events})
        elif method == "POST" and parts == ["stimuli"]:
            gw.inject_stimulus(session, self._body())
            self._send_json(202, {"queued": True})
        elif method == "GET" and parts == ["metrics", "report"]:
            self._send_json(200, gw.metrics_report())
        elif method == "POST" and parts == ["accounts"]:
            body = self._body()
            account = gw.create_account(
                session, str(body.get("username", "")),
                str(body.get("password", "")), str(body.get("role", "viewer")))
            self._send_json(201, {"username": account.username,
                                  "role": account.role})
        elif (method == "PUT" and len(parts) == 3 and parts[0] == "accounts"
              and parts[2] == "password"):
            body = self._body()
            gw.change_password(session, parts[1],
                               str(body.get("old_password", "")),
                               str(body.get("new_password", "")))
            self._send_json(200, {"changed": True})
        else:
            raise NotFoundError(f"no route for {method} /{'/'.join(parts)}")


class GatewayServer:
    """ThreadingHTTPServer wrapper with start/stop for embedding and tests."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (GatewayHandler,), {"gateway": gateway})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self.gateway = gateway
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[0], self.httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        name="officetwin-http", daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None


def serve(live: LiveSimulation, host: str = "127.0.0.1", port: int = 8025,
          state_path: Optional[str] = None) -> GatewayServer:
    """Build the gateway around a live simulation and bind the HTTP server."""
    gateway = Gateway(live, state_path)
    return GatewayServer(gateway, host, port)
