"""The extendable action set: one reserved NEW action plus confirmed speakers.

Action 0 always means "this is somebody not registered yet". Confirming a
speaker binds the next free index to a name; indices are never recycled, so
timeline entries stay valid for the life of the session.
"""

from __future__ import annotations

from .errors import InputError, StateError

NEW_ACTION = 0
NEW_LABEL = "NEW?"
NON_SPEECH_LABEL = "NON_SPEECH"


class SpeakerRegistry:
    def __init__(self):
        self._entries: dict[int, str] = {}
        self._by_name: dict[str, int] = {}
        self._next_index = 1

    def confirm(self, name: str) -> int:
        """Bind the next free action index to a new speaker name."""
        if not name:
            raise InputError("speaker name must be nonempty")
        if name in self._by_name:
            raise StateError(f"speaker name already registered: {name!r}")
        index = self._next_index
        self._entries[index] = name
        self._by_name[name] = index
        self._next_index += 1
        return index

    def actions(self) -> list[int]:
        """Available actions in index order; NEW is always present."""
        return [NEW_ACTION] + sorted(self._entries)

    def name_of(self, action: int) -> str:
        if action == NEW_ACTION:
            return NEW_LABEL
        return self._entries[action]

    def index_of(self, name: str) -> int | None:
        return self._by_name.get(name)

    def __contains__(self, action: int) -> bool:
        return action == NEW_ACTION or action in self._entries

    def __len__(self) -> int:
        """Number of available actions (confirmed speakers + NEW)."""
        return len(self._entries) + 1

    @property
    def next_index(self) -> int:
        return self._next_index

    @property
    def entries(self) -> dict[int, str]:
        return dict(self._entries)

    def to_doc(self) -> dict:
        return {
            "entries": {str(k): v for k, v in sorted(self._entries.items())},
            "next_index": self._next_index,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SpeakerRegistry":
        reg = cls()
        for key, name in doc["entries"].items():
            index = int(key)
            reg._entries[index] = name
            reg._by_name[name] = index
        reg._next_index = int(doc["next_index"])
        return reg
