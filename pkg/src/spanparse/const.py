"""Default constants and reserved symbols used in spanparse."""

EMPTY_LABEL = "∅"
"dummy label of the chart decoder, always index 0 of the label vocabulary"

UNK = "<unk>"
"unknown word / tag, index 0 of the word and POS vocabularies"

UNARY_SEP = "⋄"
"separator joining the labels of a collapsed unary chain"

PUNCT_TAGS = frozenset({"PU", ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$"})
"POS tags deleted by evaluation when punctuation deletion is enabled"

ESCAPES = {"(": "-LRB-", ")": "-RRB-"}
"token escapes used by the bracketed writer"

PARAMS_MAGIC = b"CSPN1"
"magic bytes (format name plus version digit) of the parameter container"

CHECKPOINT_VERSION = 1
"version stored in and required from checkpoint files"

LAYER_NORM_EPS = 1e-6
"variance guard of layer normalization"

FD_STEP = 1e-5
"central finite difference step used by gradient checks"

# encoder defaults
DEFAULT_D_MODEL = 128
DEFAULT_D_KV = 128
DEFAULT_HEADS = 8
DEFAULT_LAYERS = 2
DEFAULT_D_FF = 256
DEFAULT_MAX_LEN = 300
DEFAULT_D_HIDDEN = 250
"width of the span scorer hidden layer"

# training defaults
DEFAULT_MAX_EPOCHS = 150
DEFAULT_BATCH_SIZE = 150
DEFAULT_SUB_BATCH_TOKENS = 1500
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_POS_WEIGHT = 1.0
DEFAULT_PATIENCE = 10
DEFAULT_SEED = 42
ADAM_BETAS = (0.9, 0.998)
ADAM_EPS = 1e-9

INIT_EMBEDDING_RANGE = 0.1
"embeddings are drawn from uniform(-range, range)"

# checkpoint store
CHECKPOINT_TABLE = "checkpoint"
"name of the key/value table inside a checkpoint file"

TIMEOUT = 60
"default SQLite busy timeout in seconds"

CHECKPOINT_PRAGMAS = {
    "cache_size": 2**13,  # 8,192 pages
    "journal_mode": "delete",  # single file, no -wal/-shm companions
    "synchronous": 2,  # 0=OFF, 1=NORMAL, 2=FULL, 3=EXTRA
    "temp_store": 2,  # 0=DEFAULT, 1=FILE, 2=MEMORY
}
"pragma settings of checkpoint connections"
