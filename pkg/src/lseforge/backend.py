from enum import Enum


class Backend(str, Enum):
    CE = "ce"
    CE_MINUS = "ce_minus"
    CCE = "cce"
    CCE_MINUS = "cce_minus"
    BCE = "bce"

    @property
    def samples(self):
        """True for back-ends that consume a negative index matrix."""
        return self in (Backend.CE_MINUS, Backend.CCE_MINUS, Backend.BCE)

    @property
    def takes_ns(self):
        return self in (Backend.CE_MINUS, Backend.CCE_MINUS)


_ALIASES = {
    "ce-": Backend.CE_MINUS, "ce-minus": Backend.CE_MINUS, "ce_minus": Backend.CE_MINUS,
    "cce-": Backend.CCE_MINUS, "cce-minus": Backend.CCE_MINUS, "cce_minus": Backend.CCE_MINUS,
    "ccem": Backend.CCE_MINUS,
}


def parse_backend(value):
    if isinstance(value, Backend):
        return value
    key = str(value).strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Backend(key)
    except ValueError:
        choices = ", ".join(b.value for b in Backend)
        raise ValueError(f"unknown backend {value!r} (choose from {choices})") from None
