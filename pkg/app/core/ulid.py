"""
ULID (Universally Unique Lexicographically Sortable Identifier) helpers
for run identifiers.
"""
import ulid


def generate_ulid() -> str:
    """Generate a new ULID string."""
    return ulid.new().str


def is_valid_ulid(value: str) -> bool:
    """Check that a string parses as a ULID."""
    try:
        ulid.from_str(value)
    except ValueError:
        return False
    return True
