from .slug import slugify
from .stats import count_words
from .wrap import truncate
