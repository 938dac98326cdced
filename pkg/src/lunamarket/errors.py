"""Exception hierarchy shared by all lunamarket modules."""


class LunaMarketError(Exception):
    """Base class for every error raised by this package."""


# ledger
class LedgerError(LunaMarketError):
    pass


class FaucetExhausted(LedgerError):
    pass


class Unauthorized(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class FrozenHolding(LedgerError):
    pass


class AssetDestroyed(LedgerError):
    pass


class BadNonce(LedgerError):
    pass


class NonMonotoneTimestamp(LedgerError):
    pass


class NotFound(LunaMarketError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class InjectedFault(LunaMarketError):
    """Raised by test fault hooks to abort a block mid-application."""


# contentstore
class IntegrityError(LunaMarketError):
    pass


# selenography
class InvalidFrequency(LunaMarketError, ValueError):
    pass


class FrequencyMismatch(LunaMarketError, ValueError):
    pass


# netsim
class NetworkError(LunaMarketError):
    pass


class DuplicateNode(NetworkError):
    pass


class DanglingLink(NetworkError):
    pass


class UnknownNode(NetworkError):
    pass


class UnknownTarget(NetworkError):
    pass


# marketplace
class MarketError(LunaMarketError):
    pass


class InsolventClient(MarketError):
    pass


class InsolventBuyer(MarketError):
    pass


class EmptyTargets(MarketError):
    pass


class InvalidRequest(MarketError):
    pass


class AuctionClosed(MarketError):
    pass


class NotLower(MarketError):
    pass


class OverMaxPrice(MarketError):
    pass


class ReputationTooLow(MarketError):
    pass


class NotYetDue(MarketError):
    pass


class WrongState(MarketError):
    pass


class DeadlineExceeded(MarketError):
    pass


class NotHolder(MarketError):
    pass


# simharness
class ConfigError(LunaMarketError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, path: str, message: str = "") -> None:
        self.path = path
        super().__init__(f"{path}: {message}" if message else path)
