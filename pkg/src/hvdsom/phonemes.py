"""Closed phoneme inventory for /hVd/ words and its ASCII transliteration."""

from __future__ import annotations

from importlib import resources

# Canonical order: consonants, the 18 vowels, silence last. Tie-breaking
# everywhere in the package follows this order.
VOWELS: tuple[str, ...] = (
    "iː", "ɪ", "e", "æ", "ɐː", "ɐ", "ɔ", "oː", "ʊ",
    "ʉː", "ɜː", "eː", "æɪ", "ɑe", "oɪ", "əʉ", "æɔ", "ɪə",
)
SIL = "sil"
INVENTORY: tuple[str, ...] = ("h", "d", *VOWELS, SIL)
RANK: dict[str, int] = {sym: i for i, sym in enumerate(INVENTORY)}

# Outcome of classify_file when no frame votes for a vowel. Always scored wrong.
NO_VOWEL = "<none>"

WORDS: dict[str, str] = {
    "heed": "iː", "hid": "ɪ", "head": "e", "had": "æ", "hard": "ɐː",
    "hud": "ɐ", "hod": "ɔ", "horde": "oː", "hood": "ʊ", "whod": "ʉː",
    "herd": "ɜː", "haired": "eː", "hade": "æɪ", "hide": "ɑe",
    "hoyd": "oɪ", "hode": "əʉ", "howd": "æɔ", "heared": "ɪə",
}


class UnknownLabel(ValueError):
    pass


def is_vowel(symbol: str) -> bool:
    return symbol in _VOWEL_SET


_VOWEL_SET = frozenset(VOWELS)


def check(symbol: str) -> str:
    if symbol not in RANK:
        raise UnknownLabel(f"label {symbol!r} is not in the phoneme inventory")
    return symbol


def canonical_sorted(symbols) -> list[str]:
    return sorted(symbols, key=RANK.__getitem__)


def _load_ascii_table() -> tuple[dict[str, str], dict[str, str]]:
    to_ipa: dict[str, str] = {}
    text = resources.files("hvdsom").joinpath("data/phonemes.tsv").read_text(encoding="utf-8")
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        ascii_sym, ipa = line.split("\t")
        to_ipa[ascii_sym] = check(ipa)
    if set(to_ipa.values()) != set(INVENTORY):
        raise RuntimeError("phonemes.tsv does not cover the inventory")
    return to_ipa, {v: k for k, v in to_ipa.items()}


ASCII_TO_IPA, IPA_TO_ASCII = _load_ascii_table()


def from_ascii(token: str) -> str:
    try:
        return ASCII_TO_IPA[token]
    except KeyError:
        raise UnknownLabel(f"unknown ASCII phoneme symbol {token!r}") from None


def to_ascii(symbol: str) -> str:
    return IPA_TO_ASCII[check(symbol)]
