"""Shift-reduce transition system that builds a binarized mention forest.

State is ``[S, i, A]``: stack of tree elements, index of the buffer front in
the extended input ``x_0 .. x_{n-1} $`` and the action history.  Shifting
``$`` ends the episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .forest import Forest, Internal, Label, Leaf, Terminal, TreeNode

SHIFT, REDUCE, UNARY = "SHIFT", "REDUCE", "UNARY"


@dataclass(frozen=True)
class Action:
    kind: str
    label: Optional[Label] = None

    def __post_init__(self):
        if self.kind == SHIFT:
            if self.label is not None:
                raise ValueError("SHIFT takes no label")
        elif self.kind in (REDUCE, UNARY):
            if self.label is None:
                raise ValueError(f"{self.kind} needs a label")
            if self.kind == UNARY and self.label.is_temporary:
                raise ValueError("unary actions cannot build temporary labels")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @classmethod
    def shift(cls) -> Action:
        return cls(SHIFT)

    @classmethod
    def reduce(cls, label: Label | str) -> Action:
        return cls(REDUCE, Label.parse(label) if isinstance(label, str) else label)

    @classmethod
    def unary(cls, label: Label | str) -> Action:
        return cls(UNARY, Label.parse(label) if isinstance(label, str) else label)

    @classmethod
    def parse(cls, text: str) -> Action:
        text = text.strip()
        if text == SHIFT:
            return cls.shift()
        for kind in (REDUCE, UNARY):
            if text.startswith(kind + "(") and text.endswith(")"):
                return cls(kind, Label.parse(text[len(kind) + 1 : -1]))
        raise ValueError(f"cannot parse action {text!r}")

    def __str__(self) -> str:
        return self.kind if self.kind == SHIFT else f"{self.kind}({self.label})"


SHIFT_ACTION = Action.shift()


class ActionAlphabet:
    """Fixed, ordered action inventory: SHIFT, REDUCE(X), REDUCE(X*), UNARY(X)."""

    def __init__(self, base_labels: Iterable[str]):
        self.base_labels = tuple(sorted(set(base_labels)))
        labels = [Label(name) for name in self.base_labels]
        self.labels = tuple(labels + [lab.temporary for lab in labels])
        self.actions = (
            (SHIFT_ACTION,)
            + tuple(Action.reduce(lab) for lab in self.labels)
            + tuple(Action.unary(lab) for lab in labels)
        )
        self._index = {a: k for k, a in enumerate(self.actions)}

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, k: int) -> Action:
        return self.actions[k]

    def __contains__(self, action) -> bool:
        return action in self._index

    def index(self, action: Action) -> int:
        try:
            return self._index[action]
        except KeyError:
            raise KeyError(f"{action} is not in the action alphabet") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, ActionAlphabet) and self.base_labels == other.base_labels

    def __repr__(self) -> str:
        return f"ActionAlphabet({list(self.base_labels)})"


@dataclass(frozen=True)
class ParserState:
    stack: tuple[TreeNode, ...]
    buffer_front: int
    n: int
    history: tuple[Action, ...] = ()
    n_temporary: int = field(default=0, compare=False)

    @property
    def terminal(self) -> bool:
        return bool(self.stack) and isinstance(self.stack[-1], Terminal)

    @property
    def only_terminal_left(self) -> bool:
        return self.buffer_front == self.n


def initial_state(n: int) -> ParserState:
    if n < 1:
        raise ValueError("sentence must have at least one token")
    return ParserState((), 0, n, ())


class TransitionError(ValueError):
    def __init__(self, message: str, rule: Optional[str] = None, step: Optional[int] = None):
        super().__init__(message)
        self.rule = rule
        self.step = step


# constraint names, in the order they are checked
BUFFER_EMPTY = "shift-needs-buffer"
STACK_EMPTY = "unary-needs-stack"
STACK_TOO_SMALL = "reduce-needs-two"
LABELED_TOP = "no-unary-over-label"
TEMPORARY_MISMATCH = "temporary-label-mismatch"
BOTH_TEMPORARY = "both-temporary"
PENDING_TEMPORARY = "pending-temporary"
TEMPORARY_ON_RIGHT = "temporary-on-right"
DEAD_END = "dead-end"


def _is_temporary(node: TreeNode) -> bool:
    return isinstance(node, Internal) and node.label.is_temporary


def _base_violation(state: ParserState, action: Action) -> Optional[str]:
    stack = state.stack
    if action.kind == SHIFT:
        if state.buffer_front > state.n:
            return BUFFER_EMPTY
        if state.buffer_front == state.n and state.n_temporary:
            return PENDING_TEMPORARY
        return None
    if action.kind == UNARY:
        if not stack:
            return STACK_EMPTY
        if not isinstance(stack[-1], Leaf):
            return LABELED_TOP
        return None
    if len(stack) < 2:
        return STACK_TOO_SMALL
    t1, t0 = stack[-2], stack[-1]
    tmp1, tmp0 = _is_temporary(t1), _is_temporary(t0)
    if tmp1 and tmp0:
        return BOTH_TEMPORARY
    if tmp0:
        return TEMPORARY_ON_RIGHT
    if tmp1 and action.label.name != t1.label.name:
        return TEMPORARY_MISMATCH
    return None


def check_action(state: ParserState, action: Action) -> Optional[str]:
    """Name of the constraint that blocks ``action``, or None if it is valid."""
    if state.terminal:
        raise TransitionError("no actions are defined on a terminal state")
    rule = _base_violation(state, action)
    if rule is None and state.only_terminal_left and action.kind != SHIFT:
        if not _can_finish(_stack_kinds(_successor_stack(state.stack, action))):
            rule = DEAD_END
    return rule


# The feasibility guard only matters once the words are exhausted: before that
# a SHIFT is always available.  Past that point validity depends only on
# whether each stack element is a leaf, a completed node or a temporary one.
_LEAF, _DONE, _TEMP = 0, 1, 2


def _kind(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return _LEAF
    return _TEMP if _is_temporary(node) else _DONE


def _stack_kinds(stack: Sequence[TreeNode]) -> tuple[int, ...]:
    return tuple(_kind(node) for node in stack)


def _successor_stack(stack: tuple[TreeNode, ...], action: Action) -> tuple[TreeNode, ...]:
    if action.kind == UNARY:
        return stack[:-1] + (Internal(action.label, (stack[-1],)),)
    return stack[:-2] + (Internal(action.label, (stack[-2], stack[-1])),)


@lru_cache(maxsize=65536)
def _can_finish(kinds: tuple[int, ...]) -> bool:
    if _TEMP not in kinds:
        return True  # SHIFT of $ is allowed
    successors = []
    if kinds[-1] == _LEAF:
        successors.append(kinds[:-1] + (_DONE,))
    if len(kinds) >= 2 and kinds[-1] != _TEMP:
        # the label of a built temporary never affects reachability
        successors.append(kinds[:-2] + (_DONE,))
        successors.append(kinds[:-2] + (_TEMP,))
    return any(_can_finish(k) for k in successors)


@dataclass(frozen=True)
class ValidityReport:
    mask: np.ndarray  # bool, one entry per alphabet action
    blocked: dict[int, str]  # alphabet index -> constraint name

    @property
    def valid_indices(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.mask)]


def valid_actions(state: ParserState, alphabet: ActionAlphabet) -> ValidityReport:
    mask = np.zeros(len(alphabet), dtype=bool)
    blocked = {}
    for k, action in enumerate(alphabet):
        rule = check_action(state, action)
        if rule is None:
            mask[k] = True
        else:
            blocked[k] = rule
    return ValidityReport(mask, blocked)


def apply(state: ParserState, action: Action) -> ParserState:
    rule = check_action(state, action)
    if rule is not None:
        raise TransitionError(f"{action} is invalid here ({rule})", rule=rule)
    stack, n_temporary = state.stack, state.n_temporary
    if action.kind == SHIFT:
        i = state.buffer_front
        stack = stack + ((Terminal() if i == state.n else Leaf(i)),)
        return ParserState(stack, i + 1, state.n, state.history + (action,), n_temporary)
    popped = stack[-2:] if action.kind == REDUCE else stack[-1:]
    n_temporary -= sum(_is_temporary(node) for node in popped)
    n_temporary += action.label.is_temporary
    return ParserState(
        _successor_stack(stack, action),
        state.buffer_front,
        state.n,
        state.history + (action,),
        n_temporary,
    )


def oracle_actions(forest: Forest) -> list[Action]:
    """Gold action sequence: post-order over the roots, then SHIFT of $."""
    actions: list[Action] = []
    for root in forest.roots:
        _post_order(root, actions)
    actions.append(SHIFT_ACTION)
    return actions


def _post_order(node: TreeNode, out: list[Action]) -> None:
    if isinstance(node, Leaf):
        out.append(SHIFT_ACTION)
        return
    for child in node.children:
        _post_order(child, out)
    out.append(Action.unary(node.label) if node.is_unary else Action.reduce(node.label))


def replay(actions: Iterable[Action], n: int) -> Forest:
    state = initial_state(n)
    for step, action in enumerate(actions):
        if state.terminal:
            raise TransitionError(f"action {step} ({action}) follows the terminal shift", step=step)
        try:
            state = apply(state, action)
        except TransitionError as err:
            raise TransitionError(f"step {step}: {err}", rule=err.rule, step=step) from None
    if not state.terminal:
        raise TransitionError(f"sequence ends in a non-terminal state after {len(state.history)} actions")
    return Forest(state.stack[:-1])


def format_actions(actions: Iterable[Action]) -> str:
    return "".join(f"{a}\n" for a in actions)


def parse_actions(text: str) -> list[Action]:
    return [Action.parse(line) for line in text.splitlines() if line.strip()]
