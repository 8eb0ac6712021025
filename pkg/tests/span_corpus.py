"""Hand-annotated sources for span-scanner and context-enhancement tests.

Each fixture carries the source text, the expected function spans
(annotated by hand, 1-based inclusive line ranges), and a set of edits.
An edit replaces one source line and records the enclosing annotated span
(or None when the line is outside every function).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Edit:
    line: int  # 1-based line to replace
    new_text: str
    enclosing: tuple[int, int] | None  # hand-annotated span containing the line


@dataclass(frozen=True)
class Fixture:
    name: str
    source: str
    spans: dict[str, tuple[int, int]]  # qualified name -> (start, end)
    edits: list[Edit]


BASIC = Fixture(
    name="basic",
    source="""\
def top(a, b):
    return a + b

def second():
    x = 1
    return x

VALUE = 7

def third():
    if VALUE:
        return VALUE
    return 0
""",
    spans={
        "top": (1, 2),
        "second": (4, 6),
        "third": (10, 13),
    },
    edits=[
        Edit(5, "    x = 2", (4, 6)),
        Edit(8, "VALUE = 8", None),
        Edit(12, "        return VALUE + 1", (10, 13)),
    ],
)


DECORATED = Fixture(
    name="decorated",
    source="""\
import math


class Widget:
    size = 3

    @property
    def area(self):
        return self.size ** 2

    @staticmethod
    @cached
    def make(spec,
             size):
        w = Widget()
        w.size = size
        return w


def tail(x):
    return math.floor(x)
""",
    spans={
        "Widget.area": (7, 9),
        "Widget.make": (11, 17),
        "tail": (20, 21),
    },
    edits=[
        Edit(9, "        return self.size ** 3", (7, 9)),
        Edit(16, "        w.size = size * 2", (11, 17)),
        Edit(5, "    size = 4", None),
    ],
)


NESTED = Fixture(
    name="nested",
    source="""\
def outer(items):
    total = 0

    def inner(v):
        return v * 2

    for item in items:
        total += inner(item)
    return total


async def fetch(url):
    data = await get(url)
    return data


def wrapper():
    @retry
    def attempt():
        return fetch("x")

    return attempt()
""",
    spans={
        "outer": (1, 9),
        "outer.inner": (4, 5),
        "fetch": (12, 14),
        "wrapper": (17, 22),
        "wrapper.attempt": (18, 20),
    },
    edits=[
        Edit(5, "        return v * 3", (1, 9)),  # outermost encloses the nested edit
        Edit(13, "    data = await get(url, retries=2)", (12, 14)),
    ],
)


TRICKY = Fixture(
    name="tricky",
    source="""\
def long_signature(
    first,
    second,
):
    # internal comment
    return first - second
# module-level trailing comment


class TestThing:
    def test_alpha(self):
        value = compute()
        assert value == 3

    def helper(self):
        text = '''
def not_a_function():
    pass
'''
        return text
""",
    spans={
        "long_signature": (1, 6),
        "TestThing.test_alpha": (11, 13),
        "TestThing.helper": (15, 20),
    },
    edits=[
        Edit(6, "    return first + second", (1, 6)),
        Edit(13, "        assert value == 4", (11, 13)),
    ],
)


MIXED = Fixture(
    name="mixed",
    source="""\
import os
import sys

CONFIG = {
    "mode": "fast",
}


def configure(flag):
    if flag:
        return dict(CONFIG)
    return {}


def entry(argv):
    parsed = configure(bool(argv))
    return run(parsed)


def run(settings):
    code = os.system("true")
    return code or settings


class Runner:
    def __init__(self, env):
        self.env = env

    def launch(self):
        return entry(list(self.env))
""",
    spans={
        "configure": (9, 12),
        "entry": (15, 17),
        "run": (20, 22),
        "Runner.__init__": (26, 27),
        "Runner.launch": (29, 30),
    },
    edits=[
        Edit(2, "import sys as system", None),
        Edit(16, "    parsed = configure(len(argv) > 0)", (15, 17)),
        Edit(21, '    code = os.system("false")', (20, 22)),
    ],
)


LIBRARY = Fixture(
    name="library",
    source='''\
"""Utility helpers for the fixture library."""

import json


def load(path):
    with open(path) as fh:
        return json.load(fh)


def save(path, payload):
    text = json.dumps(payload)
    with open(path, "w") as fh:
        fh.write(text)


class Codec:
    version = 2

    def encode(self, value):
        return json.dumps(value).encode()

    def decode(self, blob):
        return json.loads(blob.decode())

    @classmethod
    def pair(cls):
        return cls(), cls()


def roundtrip(value):
    codec = Codec()
    return codec.decode(codec.encode(value))


async def roundtrip_async(value):
    return roundtrip(value)
''',
    spans={
        "load": (6, 8),
        "save": (11, 14),
        "Codec.encode": (20, 21),
        "Codec.decode": (23, 24),
        "Codec.pair": (26, 28),
        "roundtrip": (31, 33),
        "roundtrip_async": (36, 37),
    },
    edits=[
        Edit(8, "        return json.load(fh) or {}", (6, 8)),
        Edit(21, "        return json.dumps(value).encode('utf-8')", (20, 21)),
        Edit(3, "import json as j", None),
        Edit(33, "    return codec.decode(codec.encode(value)) if value else None", (31, 33)),
    ],
)


FIXTURES = [BASIC, DECORATED, NESTED, TRICKY, MIXED, LIBRARY]


def total_function_count() -> int:
    return sum(len(f.spans) for f in FIXTURES)
