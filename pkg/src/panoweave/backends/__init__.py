"""Pluggable model backends.

Six backend kinds drive the pipeline: inpaint, chat, vqa, superres, depth,
text2image. Each kind has a deterministic mock (the default; runs fully
offline) and an HTTP adapter speaking a small JSON protocol. Instances are
duck-typed: anything with the right method works.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

BACKEND_KINDS = ("inpaint", "chat", "vqa", "superres", "depth", "text2image")


class BackendError(RuntimeError):
    """A backend call failed; ``retriable`` hints whether retrying could help."""

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class MockScriptError(BackendError):
    """A scripted mock ran out of entries or saw an unscripted query."""

    def __init__(self, message: str):
        super().__init__(message, retriable=False)


@dataclass
class BackendDescriptor:
    kind: str
    mode: str = "mock"
    endpoint: str = ""
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.mode not in ("mock", "http"):
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ValueError(f"http backend {self.kind!r} requires an endpoint")


@dataclass
class Backends:
    """The bundle of backend instances the pipeline consumes."""

    inpaint: object
    chat: object
    vqa: object
    superres: object
    depth: Optional[object] = None
    text2image: Optional[object] = None

    @classmethod
    def all_mock(cls, seed: int = 0) -> "Backends":
        from panoweave.backends import mocks

        return cls(
            inpaint=mocks.MockInpaintBackend(),
            chat=mocks.MockChatBackend(seed=seed),
            vqa=mocks.MockVqaBackend(seed=seed),
            superres=mocks.MockSuperresBackend(),
            depth=mocks.MockDepthBackend(),
            text2image=mocks.MockTextToImageBackend(),
        )


def build_backend(desc: BackendDescriptor):
    """Instantiate one backend from its descriptor."""
    if desc.mode == "mock":
        from panoweave.backends import mocks

        makers = {
            "inpaint": lambda: mocks.MockInpaintBackend(**desc.options),
            "chat": lambda: mocks.MockChatBackend(seed=desc.seed, **desc.options),
            "vqa": lambda: mocks.MockVqaBackend(seed=desc.seed, **desc.options),
            "superres": lambda: mocks.MockSuperresBackend(**desc.options),
            "depth": lambda: mocks.MockDepthBackend(**desc.options),
            "text2image": lambda: mocks.MockTextToImageBackend(**desc.options),
        }
        return makers[desc.kind]()

    from panoweave.backends import http

    makers = {
        "inpaint": http.HttpInpaintBackend,
        "chat": http.HttpChatBackend,
        "vqa": http.HttpVqaBackend,
        "superres": http.HttpSuperresBackend,
        "depth": http.HttpDepthBackend,
        "text2image": http.HttpTextToImageBackend,
    }
    return makers[desc.kind](desc.endpoint, **desc.options)


def build_backends(descriptors: dict) -> Backends:
    """Build a bundle from {kind: BackendDescriptor}; missing kinds default to mocks."""
    mock_bundle = Backends.all_mock()
    chosen = {}
    for kind in BACKEND_KINDS:
        if kind in descriptors:
            chosen[kind] = build_backend(descriptors[kind])
        else:
            chosen[kind] = getattr(mock_bundle, kind)
    return Backends(**chosen)


__all__ = [
    "BACKEND_KINDS",
    "BackendDescriptor",
    "BackendError",
    "Backends",
    "MockScriptError",
    "build_backend",
    "build_backends",
]
