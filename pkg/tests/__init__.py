# Tests package for ELD Route Planning System