import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

REAL_JAVA = sorted((TESTS / "fixtures" / "java_real").glob("*.java"))


@pytest.fixture(scope="session")
def real_java_files():
    return REAL_JAVA


@pytest.fixture(scope="session")
def real_streams():
    from javamlm.lexer import lex

    return [lex(p.read_text(encoding="utf-8")) for p in REAL_JAVA]


_VOCABS = {}


@pytest.fixture(scope="session")
def real_vocab(real_streams):
    """``real_vocab(size)`` trains once per size and caches across the session."""
    from javamlm.wordpiece import train_vocab

    def get(size):
        if size not in _VOCABS:
            _VOCABS[size] = train_vocab(real_streams, size)
        return _VOCABS[size]

    return get


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.details = number, title, []

    def note(self, text: str) -> None:
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE[self.number] = (status, self.title, detail)
        line = f"[acceptance {self.number}] {status} {self.title}" + (f" ({detail})" if detail else "")
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{n}. {status} {title}" + (f" -- {detail}" if detail else ""))
