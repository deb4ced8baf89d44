__version__: str = "1.0.0"

from optivote.ledger import Ledger
from optivote.crypto import Signer
