from .tokens import Token, TokenKind, tokenize  # noqa: F401
from .syntax import SyntaxNode, Utterance, validate_tree  # noqa: F401
from .grammar import Lexicon, recognize  # noqa: F401
from .parser import parse, parse_into, parse_source, split_utterances  # noqa: F401
from .storage import (  # noqa: F401
    append_member, delete_into, delete_utterance, ensure_anchor, head_referent,
    insert_member, is_utterance, load_node, load_utterance, members,
    node_category, ordered_members, remove_member, store_utterance,
    utterance_category, utterance_of,
)
from .phraser import phrase, phrase_utterance  # noqa: F401
