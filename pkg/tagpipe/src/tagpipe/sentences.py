"""Tag-sentence assembly: the text actually fed to the caption encoder."""

import logging

log = logging.getLogger(__name__)

PREFIX = "A video of"


def assemble_sentence(tags, count):
    """Comma-separated sentence from the first `count` tags.

    Asking for more tags than exist takes them all with a warning; an empty
    list degrades to the bare prefix.
    """
    if count > len(tags):
        log.warning("requested %d tags but only %d available; using all",
                    count, len(tags))
        count = len(tags)
    chosen = list(tags[:count])
    if not chosen:
        log.warning("assembling sentence from an empty tag list")
        return PREFIX
    return f"{PREFIX} " + ", ".join(chosen)
