# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

from ._version import version_info, __version__  # noqa
