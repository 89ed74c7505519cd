class BridgeError(Exception):
    """Base class for bridge failures."""


class CheckpointUnavailable(BridgeError):
    pass


class MalformedInput(BridgeError):
    def __init__(self, lineno: int, detail: str):
        super().__init__(f"line {lineno}: {detail}")
        self.lineno = lineno
