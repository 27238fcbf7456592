"""Whisper command grammar and the text-editing state machine.

Channel separation is absolute: normal-voice transcripts only ever insert
text, whispered transcripts only ever execute commands. A whispered phrase
the grammar does not know is a warning and a no-op, never inserted text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .gateway import TranscriptEvent
from .router import Channel

# The per-user training phrase inventory: digits, letters, and the command
# vocabulary. The grammar must stay total over this list.
DIGIT_WORDS = ("one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "zero")
LETTER_WORDS = tuple("abcdefghijklmnopqrstuvwxyz")
TRAINING_PHRASES = (
    DIGIT_WORDS
    + LETTER_WORDS
    + (
        "newline",
        "back",
        "delete",
        "delete sentence",
        "space",
        "equal",
        "at",
        "number",
        "dollar",
        "ampersand",
        "asterisk",
        "left parenthesis",
        "right parenthesis",
        "left bracket",
        "right bracket",
        "underline",
        "hyphen",
        "plus",
        "minus",
        "percent",
        "atmark",
        "sharp",
        "spell",
        "paragraph",
        "period",
        "comma",
        "dot",
        "menu",
        "open",
        "close",
        "yes",
        "no",
        "line",
        "new",
        "repeat",
        "candidates",
        "next",
        "page",
        "word",
        "delete line",
        "delete word",
        "question mark",
        "exclamation mark",
        "quote",
        "double quote",
    )
)

SYMBOLS = {
    "period": ".",
    "dot": ".",
    "comma": ",",
    "quote": "'",
    "double quote": '"',
    "question mark": "?",
    "exclamation mark": "!",
    "left parenthesis": "(",
    "right parenthesis": ")",
    "left bracket": "[",
    "right bracket": "]",
    "at": "@",
    "atmark": "@",
    "number": "#",
    "sharp": "#",
    "dollar": "$",
    "ampersand": "&",
    "asterisk": "*",
    "underline": "_",
    "hyphen": "-",
    "minus": "-",
    "plus": "+",
    "percent": "%",
    "equal": "=",
}

# Phrases named by the inventory but with no defined editing semantics;
# registered as no-ops (with a warning) to keep the grammar total.
RESERVED_PHRASES = ("yes", "open", "next", "page", "word", "line", "new", "repeat") + LETTER_WORDS

DEFAULT_EMOJI = {
    "smile": "\U0001f60a",
    "laugh": "\U0001f602",
    "sad": "\U0001f622",
    "heart": "❤",
}

SENTENCE_TERMINATORS = ".?!"
# characters after which the next normal-voice insertion gets a leading space
_SPACE_AFTER = set(".,!?;:)]\"'%")


@dataclass(frozen=True)
class Action:
    kind: str
    arg: str | int | None = None


def default_grammar() -> dict[str, Action]:
    grammar: dict[str, Action] = {}
    for phrase, char in SYMBOLS.items():
        grammar[phrase] = Action("insert", char)
    grammar["space"] = Action("insert", " ")
    grammar["newline"] = Action("newline")
    grammar["new line"] = Action("newline")
    grammar["paragraph"] = Action("paragraph")
    grammar["back"] = Action("delete-word")
    grammar["delete word"] = Action("delete-word")
    grammar["delete"] = Action("delete-char")
    grammar["delete sentence"] = Action("delete-sentence")
    grammar["delete line"] = Action("delete-line")
    grammar["spell"] = Action("spell")
    grammar["emotion"] = Action("emotion")
    grammar["menu"] = Action("menu")
    grammar["candidates"] = Action("menu")
    grammar["close"] = Action("close")
    grammar["no"] = Action("close")
    for value, word in enumerate(DIGIT_WORDS, start=1):
        grammar[word] = Action("select", 0 if word == "zero" else value)
    for phrase in RESERVED_PHRASES:
        grammar[phrase] = Action("reserved", phrase)
    missing = [p for p in TRAINING_PHRASES if p not in grammar]
    assert not missing, f"grammar not total over training phrases: {missing}"
    return grammar


_ACTION_PATTERN = re.compile(r"^(?P<kind>[a-z-]+)(?::(?P<arg>.*))?$")
_PLAIN_ACTIONS = {
    "newline",
    "paragraph",
    "delete-word",
    "delete-char",
    "delete-sentence",
    "delete-line",
    "spell",
    "emotion",
    "menu",
    "close",
}


def parse_action(text: str) -> Action:
    m = _ACTION_PATTERN.match(text.strip())
    if not m:
        raise ValueError(f"bad action {text!r}")
    kind, arg = m.group("kind"), m.group("arg")
    if kind == "insert":
        return Action("insert", arg or " ")
    if kind == "select":
        return Action("select", int(arg))
    if kind == "reserved":
        return Action("reserved", arg or "")
    if kind in _PLAIN_ACTIONS:
        return Action(kind)
    raise ValueError(f"unknown action kind {kind!r}")


def load_grammar(path) -> dict[str, Action]:
    """Read `phrase = action` lines; missing phrases fall back to defaults."""
    grammar = default_grammar()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            phrase, _, action = line.partition("=")
            grammar[phrase.strip().lower()] = parse_action(action)
    return grammar


def _parse_codepoint(text: str) -> str:
    text = text.strip()
    if text.upper().startswith("U+") or text.lower().startswith("0x"):
        return chr(int(text[2:], 16))
    return text


def load_emoji_table(path) -> dict[str, str]:
    """Read `word = codepoint` lines (U+XXXX, 0xXXXX, or a literal)."""
    table = dict(DEFAULT_EMOJI)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, _, code = line.partition("=")
            table[word.strip().lower()] = _parse_codepoint(code)
    return table


class PhraseError(ValueError):
    pass


def parse_phrases(text: str, grammar: dict[str, Action]) -> list[Action]:
    """Tokenize a whispered transcript into commands, longest phrase first."""
    normalized = " ".join(text.lower().split())
    if not normalized:
        raise PhraseError("empty whisper transcript")
    if normalized in grammar:
        return [grammar[normalized]]
    words = normalized.split(" ")
    longest = max(len(p.split(" ")) for p in grammar)
    actions = []
    i = 0
    while i < len(words):
        for span in range(min(longest, len(words) - i), 0, -1):
            candidate = " ".join(words[i : i + span])
            if candidate in grammar:
                actions.append(grammar[candidate])
                i += span
                break
        else:
            raise PhraseError(f"unknown whisper phrase {normalized!r}")
    return actions


# ---------------------------------------------------------------------------
# Editor state


@dataclass(frozen=True)
class Menu:
    candidates: tuple[str, ...]
    target: tuple[int, int]  # character span the selection replaces

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("menu candidates must be non-empty")


@dataclass
class EditorState:
    text: str = ""
    last_span: tuple[int, int] | None = None  # most recent normal insertion
    last_alternatives: tuple[str, ...] = ()
    menu: Menu | None = None


class EventLog:
    """Append-only structured log with a strictly increasing seq counter.

    Records double as the console's push-channel payloads; editor_state
    payloads are full snapshots, never diffs.
    """

    def __init__(self):
        self.records: list[dict] = []
        self._seq = 0

    def emit(self, kind: str, payload: dict) -> dict:
        self._seq += 1
        record = {"seq": self._seq, "kind": kind, "payload": payload}
        self.records.append(record)
        return record

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def merge_events(events: list[TranscriptEvent]) -> list[TranscriptEvent]:
    """Order events by start time; a whispered command at the same t_start
    applies before the normal utterance, i.e. to the text preceding it."""
    priority = {Channel.WHISPER_STREAM: 0, Channel.NORMAL_STREAM: 1}
    return sorted(events, key=lambda e: (e.t_start, priority[e.channel]))


class CommandEngine:
    """Applies merged transcript events to the document, serially."""

    def __init__(
        self,
        grammar: dict[str, Action] | None = None,
        emoji_table: dict[str, str] | None = None,
        log: EventLog | None = None,
    ):
        self.grammar = grammar or default_grammar()
        self.emoji_table = emoji_table or dict(DEFAULT_EMOJI)
        self.log = log if log is not None else EventLog()
        self.state = EditorState()
        self.warnings: list[str] = []

    # -- event entry points --

    def apply_events(self, events: list[TranscriptEvent]) -> EditorState:
        for event in merge_events(events):
            self.apply_event(event)
        return self.state

    def apply_event(self, event: TranscriptEvent) -> EditorState:
        self.log.emit(
            "transcript",
            {
                "channel": event.channel.value,
                "text": event.text,
                "alternatives": list(event.alternatives),
                "t_start": event.t_start,
                "t_end": event.t_end,
            },
        )
        if event.channel == Channel.NORMAL_STREAM:
            self.apply_normal(event)
        else:
            self.apply_whisper(event)
        self._snapshot()
        return self.state

    def apply_normal(self, event: TranscriptEvent) -> EditorState:
        state = self.state
        if state.menu is not None:
            self._close_menu()
        sep = ""
        if state.text and (state.text[-1].isalnum() or state.text[-1] in _SPACE_AFTER):
            sep = " "
        start = len(state.text) + len(sep)
        state.text += sep + event.text
        state.last_span = (start, start + len(event.text))
        state.last_alternatives = tuple(event.alternatives)
        return state

    def apply_whisper(self, event: TranscriptEvent) -> EditorState:
        try:
            actions = parse_phrases(event.text, self.grammar)
        except PhraseError:
            self._warn(f"unrecognized whisper phrase {event.text!r} ignored")
            return self.state
        for action in actions:
            self._execute(action)
        return self.state

    # -- command execution --

    def _execute(self, action: Action) -> None:
        state = self.state
        if action.kind == "select":
            self._select(action.arg)
            return
        if action.kind == "close":
            if state.menu is not None:
                self._close_menu()
            else:
                self._warn("no menu to close")
            return
        if action.kind == "menu":
            self._open_menu()
            return
        # any other command implicitly dismisses an open menu
        if state.menu is not None:
            self._close_menu()
        if action.kind == "insert":
            state.text += action.arg
        elif action.kind == "newline":
            state.text += "\n"
        elif action.kind == "paragraph":
            state.text += "\n\n"
        elif action.kind == "delete-char":
            state.text = state.text[:-1]
        elif action.kind == "delete-word":
            self._delete_word()
        elif action.kind == "delete-sentence":
            self._delete_back_to(SENTENCE_TERMINATORS)
        elif action.kind == "delete-line":
            self._delete_back_to("\n")
        elif action.kind == "spell":
            self._spell()
        elif action.kind == "emotion":
            self._emotion()
        elif action.kind == "reserved":
            self._warn(f"reserved phrase {action.arg!r} has no effect")
        else:
            raise AssertionError(f"unhandled action {action}")
        self._clamp_span()

    def _warn(self, message: str) -> None:
        self.warnings.append(message)
        self.log.emit("warning", {"message": message})

    def _snapshot(self) -> None:
        menu = None
        if self.state.menu is not None:
            menu = {
                "candidates": list(self.state.menu.candidates),
                "target": list(self.state.menu.target),
            }
        self.log.emit("editor_state", {"text": self.state.text, "menu": menu})

    def _clamp_span(self) -> None:
        state = self.state
        if state.last_span is not None and state.last_span[1] > len(state.text):
            state.last_span = None
            state.last_alternatives = ()

    # -- menu --

    def _open_menu(self) -> None:
        state = self.state
        if not state.last_alternatives or state.last_span is None:
            self._warn("no recognition candidates to show")
            return
        state.menu = Menu(state.last_alternatives, state.last_span)
        self.log.emit(
            "menu",
            {"open": True, "candidates": list(state.menu.candidates)},
        )

    def _close_menu(self) -> None:
        self.state.menu = None
        self.log.emit("menu", {"open": False, "candidates": []})

    def _select(self, number: int) -> None:
        state = self.state
        if state.menu is None:
            self._warn(f"number {number} whispered with no menu open")
            return
        if not 1 <= number <= len(state.menu.candidates):
            self._warn(
                f"candidate {number} out of range 1..{len(state.menu.candidates)}"
            )
            return
        replacement = state.menu.candidates[number - 1]
        start, end = state.menu.target
        state.text = state.text[:start] + replacement + state.text[end:]
        state.last_span = (start, start + len(replacement))
        self._close_menu()

    # -- deletions --

    def _delete_word(self) -> None:
        state = self.state
        text = state.text
        i = len(text)
        while i > 0 and text[i - 1].isspace():
            i -= 1
        while i > 0 and not text[i - 1].isspace():
            i -= 1
        # also take the single separating space the insertion added
        if i > 0 and text[i - 1] == " ":
            i -= 1
        state.text = text[:i]

    def _delete_back_to(self, terminators: str) -> None:
        state = self.state
        text = state.text
        i = len(text)
        # the tail being deleted may itself end in whitespace or terminators
        while i > 0 and text[i - 1].isspace():
            i -= 1
        while i > 0 and text[i - 1] in terminators:
            i -= 1
        cut = 0
        for term in terminators:
            pos = text.rfind(term, 0, i)
            cut = max(cut, pos + 1)
        state.text = text[:cut]

    # -- spell / emoji --

    def _spell(self) -> None:
        state = self.state
        tokens = list(re.finditer(r"\S+", state.text))
        run: list[re.Match] = []
        next_start = None
        for tok in reversed(tokens):
            if len(tok.group()) != 1 or not tok.group().isalnum():
                break
            if next_start is not None and state.text[tok.end() : next_start] != " ":
                break
            run.append(tok)
            next_start = tok.start()
        if not run:
            self._warn("no spelled characters to join")
            return
        run.reverse()
        joined = "".join(tok.group() for tok in run)
        start = run[0].start()
        state.text = state.text[:start] + joined
        state.last_span = (start, start + len(joined))

    def _emotion(self) -> None:
        state = self.state
        tokens = list(re.finditer(r"\S+", state.text))
        if not tokens:
            self._warn("no word to replace with an emoji")
            return
        last = tokens[-1]
        emoji = self.emoji_table.get(last.group().lower())
        if emoji is None:
            self._warn(f"no emoji mapping for {last.group()!r}")
            return
        state.text = state.text[: last.start()] + emoji
        state.last_span = (last.start(), last.start() + len(emoji))
