from metagen import *

def make_structure(radius=0.3) -> Structure:
    corners = [cuboid.corners.FRONT_BOTTOM_LEFT, cuboid.corners.FRONT_BOTTOM_RIGHT,
               cuboid.corners.FRONT_TOP_LEFT, cuboid.corners.FRONT_TOP_RIGHT,
               cuboid.corners.BACK_BOTTOM_LEFT, cuboid.corners.BACK_BOTTOM_RIGHT,
               cuboid.corners.BACK_TOP_LEFT, cuboid.corners.BACK_TOP_RIGHT]
    verts = []
    for c in corners:
        verts.append(vertex(c))
    skel = skeleton(verts)
    lifted = Spheres(skel, radius)
    embedding = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    tile = Tile([lifted], embedding)
    return Structure(tile, Identity())
