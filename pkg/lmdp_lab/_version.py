# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

version_info = (0, 3, 1)
__version__ = ".".join(map(str, version_info))
