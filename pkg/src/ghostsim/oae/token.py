"""Atomic token transfer over PIF links.

A token sits in exactly one node's wallet or in one link's escrow while a
transfer is in flight. Sender and receiver apply the outcome independently
at resolution: the receiver adds the token only on confirmation, the sender
takes it back only on revert. The ledger counts wallet and escrow copies to
audit that exactly one exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConfigError
from .fabric import OaeFabric
from .link import CONFIRMED, Slice, Transfer, pif_transfer

HELD = "held"
IN_FLIGHT_FORWARD = "in-flight-forward"
IN_FLIGHT_REVERTING = "in-flight-reverting"


@dataclass
class Token:
    token_id: int
    holder: str
    state: str = HELD
    transfer: Transfer | None = None

    @property
    def position(self) -> str:
        return f"at-{self.holder}" if self.state == HELD else self.state


@dataclass(frozen=True)
class Resolution:
    t: int
    token_id: int
    src: str
    dst: str
    outcome: str
    count: int


@dataclass
class TokenLedger:
    fabric: OaeFabric
    tokens: dict[int, Token] = field(default_factory=dict)
    wallets: dict[str, set[int]] = field(default_factory=dict)
    escrow: dict[int, Transfer] = field(default_factory=dict)
    resolutions: list[Resolution] = field(default_factory=list)

    def __post_init__(self):
        self.sim = self.fabric.sim
        for x in self.fabric.adj:
            self.wallets.setdefault(x, set())
        self.fabric.failure_listeners.append(self._on_failure)

    def mint(self, token_id: int, node: str) -> Token:
        if token_id in self.tokens:
            raise ConfigError(f"token {token_id} already exists")
        tok = Token(token_id, node)
        self.tokens[token_id] = tok
        self.wallets[node].add(token_id)
        return tok

    def count(self, token_id: int) -> int:
        held = sum(token_id in w for w in self.wallets.values())
        return held + (token_id in self.escrow)

    def transfer(self, token_id: int, dst: str,
                 on_done: Callable[[Resolution], None] | None = None) -> Transfer:
        tok = self.tokens[token_id]
        if tok.state != HELD:
            raise ConfigError(f"token {token_id} is already in flight")
        src = tok.holder
        link = self.fabric.link_between(src, dst)
        self.wallets[src].discard(token_id)
        tok.state = IN_FLIGHT_FORWARD
        known_down = not self.fabric.believes_up(src, link.link_id)
        payload = (token_id,) + (0,) * 7
        xfer = pif_transfer(self.sim, link, src, Slice(token_id, payload, f"{src}->{dst}"),
                            on_result=lambda x: self._resolve(x, on_done),
                            on_arrive=None, known_down=known_down)
        tok.transfer = xfer
        self.escrow[token_id] = xfer
        return xfer

    def _on_failure(self, link_id: str, t: int) -> None:
        for tid, xfer in self.escrow.items():
            tok = self.tokens[tid]
            if tok.state != IN_FLIGHT_FORWARD:
                continue
            link = self.fabric.link_between(xfer.src, xfer.dst)
            if link.link_id != link_id:
                continue
            fwd_end = xfer.t_start + link.one_way
            if not (link.clear(xfer.src, xfer.dst, xfer.t_start, fwd_end)
                    and link.clear(xfer.dst, xfer.src, fwd_end, xfer.t_resolve)):
                tok.state = IN_FLIGHT_REVERTING

    def _resolve(self, xfer: Transfer, on_done) -> None:
        tid = xfer.slice.payload[0]
        tok = self.tokens[tid]
        del self.escrow[tid]
        # each side acts on its own view of the shared outcome
        if xfer.outcome == CONFIRMED:
            self.wallets[xfer.dst].add(tid)
        else:
            self.wallets[xfer.src].add(tid)
            if xfer.t_resolved > xfer.t_start:
                self.fabric.report_revert(xfer.src, self.fabric.adj[xfer.src][xfer.dst])
        tok.holder = xfer.dst if xfer.outcome == CONFIRMED else xfer.src
        tok.state = HELD
        tok.transfer = None
        res = Resolution(self.sim.now, tid, xfer.src, xfer.dst, xfer.outcome, self.count(tid))
        self.resolutions.append(res)
        if on_done is not None:
            on_done(res)
