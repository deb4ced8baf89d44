from optivote.models.city import *
from optivote.models.placement import *
from optivote.models.optics import *
from optivote.models.identity import *
from optivote.models.errors import *
from optivote.models.ledger import *
from optivote.models.trust import *
from optivote.models.scenario import *
from optivote.models.manifest import *
